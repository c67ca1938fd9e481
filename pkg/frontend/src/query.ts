/**
 * Query panel logic: apply server-side filters, load the result set with
 * geometry, and keep the view state in sync. The result set is always
 * exactly what the server returned.
 */

import { ApiClient, ApiError, type TrackFilters } from "./api.js";
import type { ViewStore } from "./state.js";

export class QueryPanel {
  constructor(
    private client: ApiClient,
    private store: ViewStore,
  ) {}

  async apply(filters: TrackFilters): Promise<void> {
    const project = this.store.get().project;
    if (!project) throw new Error("no active project");
    try {
      const result = await this.client.queryTracks(project, filters, true);
      this.store.update({
        filters,
        resultIds: result.ids,
        tracks: result.tracks ?? [],
        banner: null,
      });
    } catch (error) {
      if (error instanceof ApiError) {
        // 401 redirects via the client's onUnauthorized hook; other
        // failures surface as a banner and leave the layer unchanged
        if (error.status !== 401) {
          this.store.update({ banner: `query failed: ${error.message}` });
        }
        return;
      }
      throw error;
    }
  }

  async clear(): Promise<void> {
    await this.apply({});
  }
}
