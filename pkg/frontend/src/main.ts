import { ApiClient } from "./api";
import { SearchController } from "./controller";
import { viewModel } from "./render";

function baseUrl(): string {
  const meta = document.querySelector<HTMLMetaElement>('meta[name="totr-base-url"]');
  return meta?.content || window.location.origin;
}

function element<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function mount(): void {
  const api = new ApiClient(baseUrl());
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app container");

  const form = element("form", "search-form");
  const input = element("input") as HTMLInputElement;
  input.type = "text";
  input.placeholder = "Describe what you remember…";
  const submit = element("button", "submit", "Search") as HTMLButtonElement;
  submit.type = "submit";
  submit.disabled = true;
  form.append(input, submit);

  const notice = element("div", "notice");
  const history = element("div", "history");
  const results = element("ol", "results");
  const status = element("div", "status");
  root.append(form, notice, history, results, status);

  const controller = new SearchController(api, (state) => {
    const view = viewModel(state, (path) => api.mediaUrl(path));

    notice.textContent = view.errorNotice ? `${view.errorNotice} — try again` : "";
    notice.style.display = view.errorNotice ? "block" : "none";

    history.replaceChildren(
      ...view.historyItems.map((query) => {
        const chip = element("button", "history-chip", query);
        chip.type = "button";
        chip.addEventListener("click", () => {
          input.value = query; // re-edit, not auto-resubmit
          input.focus();
          submit.disabled = false;
        });
        return chip;
      }),
    );

    results.replaceChildren(
      ...view.rows.map((row) => {
        const item = element("li", row.pinned ? "hit pinned" : "hit");
        const heading = element("div", "hit-title", `${row.rank}. ${row.title || row.videoId}`);
        const score = element("span", "hit-score", ` ${row.score.toFixed(4)}`);
        heading.append(score);
        const thumbs = element("div", "thumbs");
        for (const url of row.thumbnails) {
          const img = element("img") as HTMLImageElement;
          img.src = url;
          img.loading = "lazy";
          img.alt = `scene from ${row.videoId}`;
          thumbs.append(img);
        }
        const snippet = element("p", "snippet", row.snippet);
        const pin = element(
          "button",
          "pin",
          row.pinned ? "That's it ✓" : "That's it",
        ) as HTMLButtonElement;
        pin.type = "button";
        pin.disabled = row.pinned;
        pin.addEventListener("click", () => void controller.markSolved(row.videoId));
        item.append(heading, thumbs, snippet, pin);
        return item;
      }),
    );

    status.textContent = view.searching
      ? "searching…"
      : view.latencyMs !== null
        ? `${view.rows.length} results in ${view.latencyMs.toFixed(1)} ms (index ${view.indexVersion})`
        : "";
  });

  input.addEventListener("input", () => {
    submit.disabled = input.value.trim().length === 0;
  });
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    void controller.submit(input.value);
  });
}

mount();
