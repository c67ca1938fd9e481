/**
 * Annotation actions. A batch verification issues exactly one batch
 * request for the current query regardless of how many subjects matched;
 * the user confirms a dialog stating the count first.
 */

import { ApiClient, ApiError, type TrackFilters } from "./api.js";
import type { ViewStore } from "./state.js";

export type ConfirmFn = (count: number) => Promise<boolean> | boolean;

export interface BatchOutcome {
  requested: boolean;
  count: number;
}

function filtersToQueryBody(filters: TrackFilters): Record<string, unknown> {
  const body: Record<string, unknown> = {};
  if (filters.label !== undefined) body.label = filters.label;
  if (filters.annotator !== undefined) body.annotator = filters.annotator;
  if (filters.runway !== undefined) body.runway = filters.runway;
  if (filters.verified !== undefined) body.verified = filters.verified;
  if (filters.set !== undefined) body.set = filters.set;
  if (filters.bbox !== undefined) body.bbox = filters.bbox;
  return body;
}

export async function batchAnnotateAction(
  client: ApiClient,
  store: ViewStore,
  label: string,
  confirm: ConfirmFn,
  refresh?: () => Promise<void>,
): Promise<BatchOutcome> {
  const state = store.get();
  if (!store.canMutate()) {
    store.update({ banner: "sign in to annotate" });
    return { requested: false, count: 0 };
  }
  if (!state.project || state.resultIds.length === 0) {
    store.update({ banner: "nothing to annotate: run a query first" });
    return { requested: false, count: 0 };
  }
  const confirmed = await confirm(state.resultIds.length);
  if (!confirmed) return { requested: false, count: 0 };
  try {
    const result = await client.batchAnnotate(
      state.project,
      filtersToQueryBody(state.filters),
      label,
    );
    store.update({ banner: `${result.count} annotated` });
    if (refresh) await refresh();
    return { requested: true, count: result.count };
  } catch (error) {
    if (error instanceof ApiError) {
      // no local state change on server failure
      store.update({ banner: `batch failed: ${error.message}` });
      return { requested: true, count: 0 };
    }
    throw error;
  }
}

export async function singleAnnotateAction(
  client: ApiClient,
  store: ViewStore,
  subject: string,
  label: string,
): Promise<boolean> {
  const state = store.get();
  if (!store.canMutate() || !state.project) {
    store.update({ banner: "sign in to annotate" });
    return false;
  }
  try {
    await client.annotate(state.project, subject, label);
    store.update({ banner: `${subject} annotated as ${label}` });
    return true;
  } catch (error) {
    if (error instanceof ApiError) {
      store.update({ banner: `annotate failed: ${error.message}` });
      return false;
    }
    throw error;
  }
}
