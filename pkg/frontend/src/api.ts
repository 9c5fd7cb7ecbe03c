/**
 * Typed client for the review service HTTP API.
 */

export type Decision = "accept" | "reject" | "unsure";

export interface Progress {
  pending: number;
  accepted: number;
  rejected: number;
  unsure: number;
}

export interface AnomalyFields {
  name: string;
  phenomenon: string;
  reasoning: string;
  severity: number;
}

export interface ReviewCard {
  image_id: string;
  anomaly_index: number;
  anomaly: AnomalyFields;
  image_uri: string;
  image_url: string;
  progress: Progress;
}

export interface ExhaustedPayload {
  exhausted: true;
  progress: Progress;
}

export type NextPayload = ReviewCard | ExhaustedPayload;

export interface VerdictPayload {
  image_id: string;
  anomaly_index: number;
  decision: Decision;
  annotator_id: string;
}

export function isExhausted(payload: NextPayload): payload is ExhaustedPayload {
  return (payload as ExhaustedPayload).exhausted === true;
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(message: string, readonly status?: number) {
    super(message);
    this.name = "ApiError";
  }
}

export class ReviewApi {
  private readonly fetchImpl: FetchLike;

  constructor(
    readonly baseUrl: string,
    fetchImpl?: FetchLike,
  ) {
    // Bind explicitly: browsers reject fetch calls whose receiver is lost.
    this.fetchImpl = fetchImpl ?? ((input, init) => globalThis.fetch(input, init));
  }

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  private async request(path: string, init?: RequestInit): Promise<unknown> {
    let response: Response;
    try {
      response = await this.fetchImpl(this.url(path), init);
    } catch (err) {
      throw new ApiError(`network failure: ${String(err)}`);
    }
    if (!response.ok) {
      throw new ApiError(`request failed: ${response.status}`, response.status);
    }
    return response.json();
  }

  async fetchNext(annotator: string): Promise<NextPayload> {
    const query = new URLSearchParams({ annotator });
    return (await this.request(`/api/queue/next?${query}`)) as NextPayload;
  }

  async submitVerdict(verdict: VerdictPayload): Promise<void> {
    await this.request("/api/verdicts", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(verdict),
    });
  }

  async fetchProgress(): Promise<Progress> {
    return (await this.request("/api/progress")) as Progress;
  }

  imageUrl(card: ReviewCard): string {
    return this.url(card.image_url);
  }
}
