// Client session state. Everything here mirrors what the server sent; the
// client never stores anything that could identify the original sentence.

import type { NextItem, Progress, Side } from "./api.js";

export interface ClientState {
  phase: "loading" | "item" | "complete" | "error";
  item: NextItem | null;
  selected: Side | null;
  progress: Progress | null;
  error: string | null;
}

export class SessionState {
  private state: ClientState = {
    phase: "loading",
    item: null,
    selected: null,
    progress: null,
    error: null,
  };

  get phase(): ClientState["phase"] {
    return this.state.phase;
  }

  get item(): NextItem | null {
    return this.state.item;
  }

  get selected(): Side | null {
    return this.state.selected;
  }

  get progress(): Progress | null {
    return this.state.progress;
  }

  get error(): string | null {
    return this.state.error;
  }

  showItem(item: NextItem): void {
    this.state = {
      phase: "item",
      item,
      selected: null,
      progress: item.progress,
      error: null,
    };
  }

  showComplete(progress: Progress): void {
    this.state = {
      phase: "complete",
      item: null,
      selected: null,
      progress,
      error: null,
    };
  }

  showError(message: string): void {
    this.state = { ...this.state, phase: "error", error: message };
  }

  select(side: Side): void {
    if (this.state.phase === "item") {
      this.state = { ...this.state, selected: side };
    }
  }

  canSubmit(): boolean {
    return this.state.phase === "item" && this.state.selected !== null;
  }

  dump(): ClientState {
    // full client-side state, serializable; used by tests to prove the
    // client holds nothing that distinguishes the original sentence
    return JSON.parse(JSON.stringify(this.state)) as ClientState;
  }
}
