/** Thin typed client for the insightminer review service. */

import type {
  FeedbackAck,
  Health,
  Insight,
  PcaResponse,
  Rating,
  RetrainSummary,
} from './types.js';

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
    this.name = 'ApiError';
  }
}

type FetchLike = typeof fetch;

export class ApiClient {
  constructor(
    private readonly baseUrl: string = '',
    private readonly fetchImpl: FetchLike = fetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    } catch (err) {
      throw new ApiError(0, err instanceof Error ? err.message : 'network failure');
    }
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = await response.json();
        if (body && typeof body.detail === 'string') detail = body.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  getHealth(): Promise<Health> {
    return this.request<Health>('/api/health');
  }

  getInsights(top?: number): Promise<Insight[]> {
    const query = top === undefined ? '' : `?top=${top}`;
    return this.request<Insight[]>(`/api/insights${query}`);
  }

  getAllInsights(): Promise<Insight[]> {
    return this.request<Insight[]>('/api/insights/all');
  }

  postFeedback(candidateId: string, rating: Rating): Promise<FeedbackAck> {
    return this.request<FeedbackAck>('/api/feedback', {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ candidate_id: candidateId, rating }),
    });
  }

  postRetrain(): Promise<RetrainSummary> {
    return this.request<RetrainSummary>('/api/retrain', { method: 'POST' });
  }

  getPca(): Promise<PcaResponse> {
    return this.request<PcaResponse>('/api/pca');
  }
}
