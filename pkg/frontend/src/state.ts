/**
 * Central view state: active project, filters, the currently loaded result
 * set, selection, and color mode. Simple observable store; components
 * subscribe and re-render on change.
 */

import type { SubjectGeometry, TrackFilters } from "./api.js";

export type ColorMode = "label" | "runway" | "annotator";

export interface Session {
  username: string;
}

export interface ViewState {
  project: string | null;
  session: Session | null;
  filters: TrackFilters;
  resultIds: string[];
  tracks: SubjectGeometry[];
  selection: string[];
  colorMode: ColorMode;
  banner: string | null;
}

const INITIAL: ViewState = {
  project: null,
  session: null,
  filters: {},
  resultIds: [],
  tracks: [],
  selection: [],
  colorMode: "label",
  banner: null,
};

export class ViewStore {
  private state: ViewState = { ...INITIAL };
  private listeners: Array<(state: ViewState) => void> = [];

  get(): ViewState {
    return this.state;
  }

  subscribe(listener: (state: ViewState) => void): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  update(partial: Partial<ViewState>): void {
    this.state = { ...this.state, ...partial };
    // selections must stay within the loaded result set
    if (partial.resultIds !== undefined || partial.selection !== undefined) {
      const loaded = new Set(this.state.resultIds);
      this.state.selection = this.state.selection.filter((id) => loaded.has(id));
    }
    for (const listener of this.listeners) listener(this.state);
  }

  /** Mutating actions are available only with a live session. */
  canMutate(): boolean {
    return this.state.session !== null;
  }
}
