import { describe, expect, it } from 'vitest';

import { QueryServiceClient } from '../src/api.js';
import {
  applyOptimisticCorrection,
  correctionFlow,
  selectableLabels,
} from '../src/corrections.js';
import type { CorrectionUpdate } from '../src/corrections.js';
import { renderPlateDetail } from '../src/detail.js';
import type { PlateProfile } from '../src/types.js';
import { fixtureFetch, loadFixture } from './helpers.js';

const xtk = loadFixture('plate_xtk482.json').body as PlateProfile;

describe('applyOptimisticCorrection', () => {
  it('overrides the effective label locally without touching the input', () => {
    const updated = applyOptimisticCorrection(xtk, 'colour', 'White', 'officer-1');
    expect(updated.tasks.colour?.effective_label).toBe('White');
    expect(updated.tasks.colour?.correction?.label).toBe('White');
    expect(xtk.tasks.colour?.correction).toBeNull();
  });
});

describe('correctionFlow', () => {
  it('posts the correction and reconciles the view with the server profile', async () => {
    const { fetchFn, calls } = fixtureFetch({ '/v1/corrections': 'correction_xtk482.json' });
    const client = new QueryServiceClient('http://svc', fetchFn);
    const updates: CorrectionUpdate[] = [];

    const final = await correctionFlow(client, xtk, 'colour', 'White', 'console-fixture', (u) =>
      updates.push(u),
    );

    expect(updates.map((u) => u.phase)).toEqual(['optimistic', 'confirmed']);
    expect(updates[0]!.profile.tasks.colour?.effective_label).toBe('White');

    const recorded = loadFixture('correction_xtk482.json').body as PlateProfile;
    expect(final).toEqual(recorded);
    expect(final.tasks.colour?.correction?.label).toBe('White');

    const body = JSON.parse(String(calls[0]!.init?.body));
    expect(body).toEqual({
      plate_id: 'XTK-482',
      task: 'colour',
      label: 'White',
      author: 'console-fixture',
    });
    expect(calls[0]!.init?.method).toBe('POST');

    // the POST result drives the detail view
    const html = renderPlateDetail(final);
    expect(html).toContain('corrected: White');
  });

  it('rolls back the optimistic state when the server rejects', async () => {
    const { fetchFn } = fixtureFetch({ '/v1/corrections': 'correction_rejected.json' });
    const client = new QueryServiceClient('http://svc', fetchFn);
    const updates: CorrectionUpdate[] = [];

    const final = await correctionFlow(client, xtk, 'colour', 'Chartreuse', 'x', (u) =>
      updates.push(u),
    );

    expect(updates.map((u) => u.phase)).toEqual(['optimistic', 'rolled_back']);
    expect(final).toEqual(xtk);
    expect(updates[1]!.error).toContain('Chartreuse');
  });

  it('rolls back on network failure', async () => {
    const failing = async () => {
      throw new TypeError('connection reset');
    };
    const client = new QueryServiceClient('http://svc', failing);
    const updates: CorrectionUpdate[] = [];
    const final = await correctionFlow(client, xtk, 'colour', 'White', 'x', (u) =>
      updates.push(u),
    );
    expect(updates.map((u) => u.phase)).toEqual(['optimistic', 'rolled_back']);
    expect(final).toEqual(xtk);
  });
});

describe('selectableLabels', () => {
  it('copies canonical labels and tolerates missing taxonomies', () => {
    expect(selectableLabels(['Red', 'White'])).toEqual(['Red', 'White']);
    expect(selectableLabels(undefined)).toEqual([]);
  });
});
