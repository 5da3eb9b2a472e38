/** Session-resume persistence: only the session id is kept client-side. */

export interface SessionIdStore {
  save(sessionId: string): void;
  load(): string | null;
  clear(): void;
}

const KEY = "pcdkit.session_id";

export class BrowserSessionIdStore implements SessionIdStore {
  save(sessionId: string): void {
    window.localStorage.setItem(KEY, sessionId);
  }

  load(): string | null {
    return window.localStorage.getItem(KEY);
  }

  clear(): void {
    window.localStorage.removeItem(KEY);
  }
}

export class MemorySessionIdStore implements SessionIdStore {
  private value: string | null = null;

  save(sessionId: string): void {
    this.value = sessionId;
  }

  load(): string | null {
    return this.value;
  }

  clear(): void {
    this.value = null;
  }
}
