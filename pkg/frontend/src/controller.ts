import { ApiClient } from "./api";
import {
  canSubmit,
  initialState,
  markSolved,
  searchFailed,
  searchSucceeded,
  SessionState,
  startSearch,
} from "./state";

/**
 * Session controller: owns the state, talks to the API, and enforces the
 * single-in-flight-search rule (a newer submission aborts the pending one).
 */
export class SearchController {
  state: SessionState = initialState();

  private inFlight: AbortController | null = null;
  private readonly onChange: (state: SessionState) => void;

  constructor(
    private readonly api: ApiClient,
    onChange: (state: SessionState) => void = () => {},
  ) {
    this.onChange = onChange;
  }

  private update(state: SessionState): void {
    this.state = state;
    this.onChange(state);
  }

  async submit(query: string, k = 10): Promise<void> {
    if (!canSubmit(query)) {
      return;
    }
    this.inFlight?.abort();
    const controller = new AbortController();
    this.inFlight = controller;
    this.update(startSearch(this.state, query));
    try {
      const response = await this.api.search(query, k, controller.signal);
      if (this.inFlight !== controller) {
        return; // a newer search superseded this one
      }
      this.inFlight = null;
      this.update(searchSucceeded(this.state, query, response));
    } catch (err) {
      if (controller.signal.aborted) {
        return;
      }
      if (this.inFlight === controller) {
        this.inFlight = null;
      }
      const message = err instanceof Error ? err.message : String(err);
      this.update(searchFailed(this.state, query, message));
    }
  }

  /** Send one feedback POST for the chosen result and pin it. */
  async markSolved(videoId: string): Promise<void> {
    const next = markSolved(this.state, videoId);
    if (next === this.state || this.state.lastQuery === null) {
      return;
    }
    await this.api.feedback(this.state.lastQuery, videoId);
    this.update(next);
  }
}
