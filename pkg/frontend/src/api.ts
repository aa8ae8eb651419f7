/**
 * Typed client for the query-service HTTP API.
 *
 * The fetch implementation is injectable so contract tests can replay
 * recorded responses without a network.
 */

import type {
  CorrectionRequest,
  HealthResponse,
  PlateProfile,
  SearchResponse,
  TaskName,
  TaxonomyMap,
} from './types.js';

export interface SearchFilters {
  make?: string[];
  shape?: string[];
  colour?: string[];
  colour_binary?: string[];
  from?: string;
  to?: string;
  includeUnknown?: boolean;
  offset?: number;
  limit?: number;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`API error ${status}: ${detail}`);
    this.name = 'ApiError';
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

const LABEL_FILTERS: readonly TaskName[] = ['make', 'shape', 'colour', 'colour_binary'];

export function buildSearchParams(filters: SearchFilters): URLSearchParams {
  const params = new URLSearchParams();
  for (const task of LABEL_FILTERS) {
    const labels = filters[task];
    if (labels && labels.length > 0) {
      params.set(task, labels.join(','));
    }
  }
  if (filters.from) params.set('from', filters.from);
  if (filters.to) params.set('to', filters.to);
  if (filters.includeUnknown) params.set('include_unknown', 'true');
  if (filters.offset !== undefined) params.set('offset', String(filters.offset));
  if (filters.limit !== undefined) params.set('limit', String(filters.limit));
  return params;
}

export class QueryServiceClient {
  private readonly baseUrl: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl: string, fetchFn: FetchLike = fetch) {
    this.baseUrl = baseUrl.replace(/\/$/, '');
    this.fetchFn = fetchFn;
  }

  async search(filters: SearchFilters): Promise<SearchResponse> {
    const params = buildSearchParams(filters);
    return this.request<SearchResponse>(`/v1/search?${params.toString()}`);
  }

  async getPlate(plateId: string): Promise<PlateProfile> {
    return this.request<PlateProfile>(`/v1/plates/${encodeURIComponent(plateId)}`);
  }

  async submitCorrection(request: CorrectionRequest): Promise<PlateProfile> {
    return this.request<PlateProfile>('/v1/corrections', {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(request),
    });
  }

  async taxonomies(): Promise<TaxonomyMap> {
    return this.request<TaxonomyMap>('/v1/taxonomies');
  }

  async health(): Promise<HealthResponse> {
    return this.request<HealthResponse>('/v1/health');
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(this.baseUrl + path, init);
    } catch (cause) {
      throw new ApiError(0, `service unreachable: ${String(cause)}`);
    }
    const body = await response.json().catch(() => null);
    if (!response.ok) {
      const detail =
        body && typeof body === 'object' && 'detail' in body
          ? String((body as { detail: unknown }).detail)
          : response.statusText;
      throw new ApiError(response.status, detail);
    }
    return body as T;
  }
}
