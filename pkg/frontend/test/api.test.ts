import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api";
import { jsonResponse, searchResponse, stubFetch } from "./helpers";

describe("ApiClient", () => {
  it("posts the search wire shape and parses the response", async () => {
    const { fetchFn, calls } = stubFetch([jsonResponse(searchResponse(["v1", "v2"]))]);
    const api = new ApiClient("http://svc:8080/", fetchFn);
    const response = await api.search("a foggy harbor", 5);
    expect(calls[0].url).toBe("http://svc:8080/v1/search");
    expect(calls[0].init.method).toBe("POST");
    expect(calls[0].body).toEqual({ query_text: "a foggy harbor", k: 5 });
    expect(response.results.map((r) => r.video_id)).toEqual(["v1", "v2"]);
  });

  it("posts feedback with the chosen id exactly once", async () => {
    const { fetchFn, calls } = stubFetch([jsonResponse({ ok: true })]);
    const api = new ApiClient("http://svc:8080", fetchFn);
    const ack = await api.feedback("a foggy harbor", "v2");
    expect(ack.ok).toBe(true);
    expect(calls).toHaveLength(1);
    expect(calls[0].url).toBe("http://svc:8080/v1/feedback");
    expect(calls[0].body).toEqual({ query_id: "a foggy harbor", chosen_video_id: "v2" });
  });

  it("raises on non-2xx responses", async () => {
    const { fetchFn } = stubFetch([jsonResponse({ detail: "bad" }, 422)]);
    const api = new ApiClient("http://svc", fetchFn);
    await expect(api.search("x", 10)).rejects.toThrow("HTTP 422");
  });

  it("forwards the abort signal", async () => {
    let seen: AbortSignal | undefined;
    const fetchFn = async (_url: string, init?: RequestInit) => {
      seen = init?.signal ?? undefined;
      return jsonResponse(searchResponse([]));
    };
    const api = new ApiClient("http://svc", fetchFn);
    const controller = new AbortController();
    await api.search("x", 1, controller.signal);
    expect(seen).toBe(controller.signal);
  });

  it("builds media URLs from scene paths", () => {
    const api = new ApiClient("http://svc:8080/");
    expect(api.mediaUrl("vid0001/scenes/0002.jpg")).toBe(
      "http://svc:8080/media/vid0001/scenes/0002.jpg",
    );
  });
});
