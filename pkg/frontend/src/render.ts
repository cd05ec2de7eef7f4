import type { SessionState } from "./state";

/**
 * View model derived purely from session state. Result order is exactly the
 * server's: no client-side ranking, filtering, or score-based reordering.
 */
export interface ResultRow {
  rank: number;
  videoId: string;
  title: string;
  score: number;
  thumbnails: string[];
  snippet: string;
  pinned: boolean;
}

export interface ViewModel {
  rows: ResultRow[];
  /** Past queries, most recent first, for one-click re-edit. */
  historyItems: string[];
  searching: boolean;
  errorNotice: string | null;
  latencyMs: number | null;
  indexVersion: string | null;
}

const MAX_THUMBNAILS = 3;

export function viewModel(state: SessionState, mediaUrl: (path: string) => string): ViewModel {
  const rows = (state.current?.results ?? []).map((hit, index) => ({
    rank: index + 1,
    videoId: hit.video_id,
    title: hit.title,
    score: hit.score,
    thumbnails: hit.top_scene_paths.slice(0, MAX_THUMBNAILS).map(mediaUrl),
    snippet: hit.transcript_snippet,
    pinned: state.selected === hit.video_id,
  }));
  return {
    rows,
    historyItems: [...state.history].reverse(),
    searching: state.pending !== null,
    errorNotice: state.error,
    latencyMs: state.current?.latency_ms ?? null,
    indexVersion: state.current?.index_version ?? null,
  };
}
