import type { FeedbackAck, SearchResponse } from "./types";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Thin client for the totr HTTP API. The base URL is the only configuration. */
export class ApiClient {
  private readonly baseUrl: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl: string, fetchFn: FetchLike = (...args) => fetch(...args)) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.fetchFn = fetchFn;
  }

  async search(queryText: string, k: number, signal?: AbortSignal): Promise<SearchResponse> {
    const response = await this.fetchFn(`${this.baseUrl}/v1/search`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ query_text: queryText, k }),
      signal,
    });
    if (!response.ok) {
      throw new Error(`search failed: HTTP ${response.status}`);
    }
    return (await response.json()) as SearchResponse;
  }

  async feedback(queryId: string, chosenVideoId: string): Promise<FeedbackAck> {
    const response = await this.fetchFn(`${this.baseUrl}/v1/feedback`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ query_id: queryId, chosen_video_id: chosenVideoId }),
    });
    if (!response.ok) {
      throw new Error(`feedback failed: HTTP ${response.status}`);
    }
    return (await response.json()) as FeedbackAck;
  }

  /** Absolute URL for a scene image served under /media/. */
  mediaUrl(scenePath: string): string {
    return `${this.baseUrl}/media/${scenePath}`;
  }
}
