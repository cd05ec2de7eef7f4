import type { SearchResponse } from "../src/types";

export interface RecordedCall {
  url: string;
  init: RequestInit;
  body: unknown;
}

export function jsonResponse(payload: unknown, status = 200): Response {
  return new Response(JSON.stringify(payload), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

/** A fetch stub that replies from a queue and records every call. */
export function stubFetch(replies: Array<Response | Error>) {
  const calls: RecordedCall[] = [];
  const fetchFn = async (url: string, init?: RequestInit): Promise<Response> => {
    const body = init?.body ? JSON.parse(String(init.body)) : null;
    calls.push({ url, init: init ?? {}, body });
    const reply = replies.shift();
    if (reply === undefined) {
      throw new Error(`unexpected fetch call to ${url}`);
    }
    if (reply instanceof Error) {
      throw reply;
    }
    return reply;
  };
  return { fetchFn, calls };
}

/** A fetch stub whose replies are released manually, for in-flight tests. */
export function hangingFetch() {
  const calls: Array<{
    url: string;
    body: unknown;
    signal: AbortSignal | undefined;
    resolve: (response: Response) => void;
  }> = [];
  const fetchFn = (url: string, init?: RequestInit): Promise<Response> =>
    new Promise<Response>((resolve, reject) => {
      const signal = init?.signal ?? undefined;
      calls.push({
        url,
        body: init?.body ? JSON.parse(String(init.body)) : null,
        signal,
        resolve,
      });
      signal?.addEventListener("abort", () =>
        reject(new DOMException("The operation was aborted.", "AbortError")),
      );
    });
  return { fetchFn, calls };
}

export function searchResponse(ids: string[], scores?: number[]): SearchResponse {
  return {
    results: ids.map((videoId, i) => ({
      video_id: videoId,
      score: scores ? scores[i] : 1.0 - i * 0.1,
      title: `Title for ${videoId}`,
      top_scene_paths: [
        `${videoId}/scenes/0000.jpg`,
        `${videoId}/scenes/0001.jpg`,
        `${videoId}/scenes/0002.jpg`,
        `${videoId}/scenes/0003.jpg`,
      ],
      transcript_snippet: `snippet of ${videoId}`,
    })),
    latency_ms: 3.2,
    index_version: "abc123",
  };
}
