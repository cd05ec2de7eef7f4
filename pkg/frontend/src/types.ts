/** Wire types for the totr search service (snake_case mirrors the HTTP API). */

export interface SearchHit {
  video_id: string;
  score: number;
  title: string;
  top_scene_paths: string[];
  transcript_snippet: string;
}

export interface SearchResponse {
  results: SearchHit[];
  latency_ms: number;
  index_version: string;
}

export interface FeedbackAck {
  ok: boolean;
}
