// Typed client for the judgment service wire API. The server is the single
// source of truth for session progress; the client never learns which side
// of a pair is the original sentence.

export interface Progress {
  judged: number;
  total: number;
  batch_index: number;
  batch_count: number;
  batch_size: number;
}

export interface NextItem {
  status: "item" | "complete";
  pair_id?: string | null;
  sentence_a?: string | null;
  sentence_b?: string | null;
  span_a?: [number, number] | null;
  span_b?: [number, number] | null;
  progress: Progress;
}

export interface SessionInfo {
  annotator_id: string;
  progress: Progress;
}

export type Side = "A" | "B";

export type SubmitResult =
  | { ok: true; progress: Progress }
  | { ok: false; duplicate: true };

export class ApiError extends Error {
  constructor(message: string, readonly status?: number) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class JudgeApi {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  private async request(path: string, init?: RequestInit): Promise<Response> {
    let response: Response;
    try {
      response = await this.fetchFn(this.url(path), init);
    } catch (err) {
      throw new ApiError(`network failure: ${String(err)}`);
    }
    return response;
  }

  async openSession(token: string): Promise<SessionInfo> {
    const response = await this.request("/session/open", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ token }),
    });
    if (!response.ok) {
      throw new ApiError(`could not open session (${response.status})`, response.status);
    }
    return (await response.json()) as SessionInfo;
  }

  async nextItem(token: string): Promise<NextItem> {
    const response = await this.request(`/session/${token}/next`);
    if (!response.ok) {
      throw new ApiError(`could not fetch next item (${response.status})`, response.status);
    }
    return (await response.json()) as NextItem;
  }

  async submit(token: string, pairId: string, choice: Side): Promise<SubmitResult> {
    const response = await this.request(`/session/${token}/submit`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ pair_id: pairId, choice }),
    });
    if (response.status === 409) {
      // already judged, e.g. a second tab: resync with the server
      return { ok: false, duplicate: true };
    }
    if (!response.ok) {
      throw new ApiError(`submit failed (${response.status})`, response.status);
    }
    const body = (await response.json()) as { progress: Progress };
    return { ok: true, progress: body.progress };
  }

  async progress(token: string): Promise<Progress> {
    const response = await this.request(`/session/${token}/progress`);
    if (!response.ok) {
      throw new ApiError(`could not fetch progress (${response.status})`, response.status);
    }
    return (await response.json()) as Progress;
  }
}
