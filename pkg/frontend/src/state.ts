import type { SearchResponse } from "./types";

/**
 * Session state for one search session. All transitions are pure functions,
 * so replaying the same action sequence always reproduces the same state.
 * History is append-only within a session.
 */
export interface SessionState {
  readonly history: readonly string[];
  readonly current: SearchResponse | null;
  /** Query that produced `current`; feedback is attributed to it. */
  readonly lastQuery: string | null;
  /** Query currently in flight, if any. */
  readonly pending: string | null;
  readonly error: string | null;
  readonly selected: string | null;
}

export function initialState(): SessionState {
  return {
    history: [],
    current: null,
    lastQuery: null,
    pending: null,
    error: null,
    selected: null,
  };
}

export function canSubmit(input: string): boolean {
  return input.trim().length > 0;
}

/** A newly submitted query: recorded in history, marked in flight. */
export function startSearch(state: SessionState, query: string): SessionState {
  return {
    ...state,
    history: [...state.history, query],
    pending: query,
    error: null,
  };
}

export function searchSucceeded(
  state: SessionState,
  query: string,
  response: SearchResponse,
): SessionState {
  return {
    ...state,
    current: response,
    lastQuery: query,
    pending: state.pending === query ? null : state.pending,
    error: null,
    selected: null,
  };
}

/** Failure keeps history and the previous results so the user can retry. */
export function searchFailed(state: SessionState, query: string, message: string): SessionState {
  return {
    ...state,
    pending: state.pending === query ? null : state.pending,
    error: message,
  };
}

/** Pin a result as "that's it"; only ids in the current results are valid. */
export function markSolved(state: SessionState, videoId: string): SessionState {
  const known = state.current?.results.some((hit) => hit.video_id === videoId) ?? false;
  if (!known) {
    return state;
  }
  return { ...state, selected: videoId };
}
