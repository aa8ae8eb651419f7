import { describe, expect, it } from 'vitest';

import { ApiError, QueryServiceClient, buildSearchParams } from '../src/api.js';
import type { SearchResponse } from '../src/types.js';
import { fixtureFetch, loadFixture } from './helpers.js';

describe('buildSearchParams', () => {
  it('joins label sets with commas', () => {
    const params = buildSearchParams({ colour: ['Red', 'White'], make: ['Toyota'] });
    expect(params.get('colour')).toBe('Red,White');
    expect(params.get('make')).toBe('Toyota');
  });

  it('adds include_unknown only when set', () => {
    expect(buildSearchParams({ colour: ['Red'] }).get('include_unknown')).toBeNull();
    expect(
      buildSearchParams({ colour: ['Red'], includeUnknown: true }).get('include_unknown'),
    ).toBe('true');
  });

  it('carries the time window and paging', () => {
    const params = buildSearchParams({
      colour: ['Red'],
      from: '2025-04-01T00:00:00Z',
      to: '2025-04-02T00:00:00Z',
      offset: 20,
      limit: 10,
    });
    expect(params.get('from')).toBe('2025-04-01T00:00:00Z');
    expect(params.get('to')).toBe('2025-04-02T00:00:00Z');
    expect(params.get('offset')).toBe('20');
    expect(params.get('limit')).toBe('10');
  });

  it('skips empty label arrays', () => {
    expect(buildSearchParams({ colour: [], make: ['Toyota'] }).has('colour')).toBe(false);
  });
});

describe('QueryServiceClient', () => {
  it('decodes a recorded search response', async () => {
    const { fetchFn, calls } = fixtureFetch({ '/v1/search': 'search_red.json' });
    const client = new QueryServiceClient('http://svc', fetchFn);
    const response = await client.search({ colour: ['Red'] });
    const recorded = loadFixture('search_red.json').body as SearchResponse;
    expect(response).toEqual(recorded);
    expect(calls[0]!.url).toBe('http://svc/v1/search?colour=Red');
  });

  it('decodes a recorded plate profile', async () => {
    const { fetchFn } = fixtureFetch({ '/v1/plates/XTK-482': 'plate_xtk482.json' });
    const client = new QueryServiceClient('http://svc', fetchFn);
    const profile = await client.getPlate('XTK-482');
    expect(profile.plate_id).toBe('XTK-482');
    expect(profile.tasks.make?.winner).toBe('Mercedes');
  });

  it('maps a 404 to ApiError with the status', async () => {
    const { fetchFn } = fixtureFetch({ '/v1/plates/': 'plate_missing.json' });
    const client = new QueryServiceClient('http://svc', fetchFn);
    await expect(client.getPlate('ZZZ-000')).rejects.toMatchObject({
      name: 'ApiError',
      status: 404,
    });
  });

  it('maps a rejected correction to a 422 ApiError with the detail', async () => {
    const { fetchFn } = fixtureFetch({ '/v1/corrections': 'correction_rejected.json' });
    const client = new QueryServiceClient('http://svc', fetchFn);
    const rejected = client.submitCorrection({
      plate_id: 'XTK-482',
      task: 'colour',
      label: 'Chartreuse',
      author: 'x',
    });
    await expect(rejected).rejects.toBeInstanceOf(ApiError);
    await expect(rejected).rejects.toMatchObject({ status: 422 });
  });

  it('wraps network failures as status 0', async () => {
    const failing = async () => {
      throw new TypeError('connection refused');
    };
    const client = new QueryServiceClient('http://svc', failing);
    await expect(client.health()).rejects.toMatchObject({ status: 0 });
  });
});
