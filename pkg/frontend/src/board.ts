// The live tag table. Rows carry data-tag attributes; updates mutate cells
// in place, and bursts of deltas coalesce into one render per frame.
// Plain createElement throughout: the table convenience APIs are uneven
// across DOM implementations.

import { formatValue, TagBoardState } from "./state.js";
import { isControllable, type ApiTagView } from "./types.js";

const COLUMNS = ["tag", "instMag", "mag", "validity", "updated", ""] as const;

export class TagBoard {
  readonly state: TagBoardState;
  private body: HTMLElement;
  private rowsByTag = new Map<string, HTMLElement>();
  private renderQueued = false;
  private filter = "";

  constructor(
    private container: HTMLElement,
    options: { pollPeriodMs?: number } = {},
    private onControl: (view: ApiTagView) => void = () => undefined,
  ) {
    this.state = new TagBoardState(options);
    const table = document.createElement("table");
    table.className = "tagboard";
    const head = document.createElement("thead");
    const headRow = document.createElement("tr");
    for (const column of COLUMNS) {
      const th = document.createElement("th");
      th.textContent = column;
      headRow.appendChild(th);
    }
    head.appendChild(headRow);
    table.appendChild(head);
    this.body = document.createElement("tbody");
    table.appendChild(this.body);
    this.container.appendChild(table);
  }

  setFilter(prefix: string): void {
    this.filter = prefix;
    this.render();
  }

  load(views: ApiTagView[]): void {
    this.state.load(views);
    this.render();
  }

  applyDeltas(views: ApiTagView[]): void {
    this.state.applyDeltas(views);
    this.scheduleRender();
  }

  private scheduleRender(): void {
    if (this.renderQueued) return;
    this.renderQueued = true;
    const raf =
      typeof requestAnimationFrame === "function"
        ? requestAnimationFrame
        : (fn: () => void) => setTimeout(fn, 16);
    raf(() => {
      this.renderQueued = false;
      this.render();
    });
  }

  private makeRow(view: ApiTagView): HTMLElement {
    const row = document.createElement("tr");
    row.dataset.tag = view.name;
    for (let i = 0; i < COLUMNS.length; i++) {
      row.appendChild(document.createElement("td"));
    }
    (row.children[0] as HTMLElement).textContent = view.name;
    if (isControllable(view)) {
      const button = document.createElement("button");
      button.textContent = "control…";
      button.className = "control-btn";
      button.addEventListener("click", () => this.onControl(view));
      row.children[5].appendChild(button);
    }
    return row;
  }

  render(now: number = Date.now()): void {
    const views = this.state.list(this.filter);
    const wanted = new Set(views.map((v) => v.name));
    for (const [tag, row] of this.rowsByTag) {
      if (!wanted.has(tag)) {
        row.remove();
        this.rowsByTag.delete(tag);
      }
    }
    for (const view of views) {
      let row = this.rowsByTag.get(view.name);
      if (!row) {
        row = this.makeRow(view);
        this.rowsByTag.set(view.name, row);
      }
      const cells = row.children;
      (cells[1] as HTMLElement).textContent = formatValue(view, view.instMag);
      (cells[2] as HTMLElement).textContent = formatValue(view, view.mag);
      (cells[3] as HTMLElement).textContent = view.validity;
      (cells[4] as HTMLElement).textContent =
        view.timestamp === null ? "—" : new Date(view.timestamp).toISOString().slice(11, 19);
      row.classList.toggle("invalid", view.validity === "invalid");
      row.classList.toggle("stale", this.state.isStale(view.name, now));
      this.body.appendChild(row); // appendChild moves: final order == sort order
    }
  }

  row(tag: string): HTMLElement | null {
    return this.rowsByTag.get(tag) ?? null;
  }
}
