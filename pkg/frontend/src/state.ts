// Console-side tag model: current rows plus staleness bookkeeping.

import type { ApiTagView } from "./types.js";

export interface StateOptions {
  pollPeriodMs?: number; // staleness threshold is three poll periods
}

export class TagBoardState {
  rows = new Map<string, ApiTagView>();
  private updatedAt = new Map<string, number>();
  readonly staleAfterMs: number;

  constructor(options: StateOptions = {}) {
    this.staleAfterMs = (options.pollPeriodMs ?? 2000) * 3;
  }

  load(views: ApiTagView[], now: number = Date.now()): void {
    this.rows.clear();
    this.updatedAt.clear();
    this.applyDeltas(views, now);
  }

  applyDeltas(views: ApiTagView[], now: number = Date.now()): string[] {
    const changed: string[] = [];
    for (const view of views) {
      this.rows.set(view.name, view);
      this.updatedAt.set(view.name, now);
      changed.push(view.name);
    }
    return changed;
  }

  list(prefix = ""): ApiTagView[] {
    const out = [...this.rows.values()].filter((v) => v.name.startsWith(prefix));
    out.sort((a, b) => a.name.localeCompare(b.name));
    return out;
  }

  isStale(name: string, now: number = Date.now()): boolean {
    const at = this.updatedAt.get(name);
    return at === undefined ? true : now - at > this.staleAfterMs;
  }
}

export function formatValue(view: ApiTagView, value: number | boolean | null): string {
  if (value === null || value === undefined) return "—";
  if (typeof value === "boolean") return value ? "TRUE" : "FALSE";
  const text = Math.abs(value) >= 100 ? value.toFixed(1) : value.toFixed(3);
  return view.unit ? `${text} ${view.unit}` : text;
}
