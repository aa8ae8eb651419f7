/**
 * Correction flow with optimistic updates.
 *
 * The detail view is updated locally the moment the investigator submits,
 * then reconciled with the server response; a rejected POST rolls the
 * view back to the pre-submit profile.
 */

import { ApiError, QueryServiceClient } from './api.js';
import type { PlateProfile, TaskName, TaskResult } from './types.js';

export type CorrectionPhase = 'optimistic' | 'confirmed' | 'rolled_back';

export interface CorrectionUpdate {
  phase: CorrectionPhase;
  profile: PlateProfile;
  error?: string;
}

const EMPTY_RESULT: TaskResult = {
  backend_id: null,
  winner: null,
  tie_broken: false,
  counts: {},
  evidence: [],
  correction: null,
  corrections: [],
  effective_label: null,
};

/** Pure local application of a correction, pending server confirmation. */
export function applyOptimisticCorrection(
  profile: PlateProfile,
  task: TaskName,
  label: string,
  author: string,
): PlateProfile {
  const current = profile.tasks[task] ?? EMPTY_RESULT;
  const correction = {
    label,
    author,
    corrected_at: new Date().toISOString(),
  };
  return {
    ...profile,
    tasks: {
      ...profile.tasks,
      [task]: {
        ...current,
        correction,
        corrections: [...current.corrections, correction],
        effective_label: label,
      },
    },
  };
}

/**
 * Submit a correction, reporting each view state through onUpdate:
 * optimistic immediately, then confirmed (server truth) or rolled_back.
 */
export async function correctionFlow(
  client: QueryServiceClient,
  profile: PlateProfile,
  task: TaskName,
  label: string,
  author: string,
  onUpdate: (update: CorrectionUpdate) => void,
): Promise<PlateProfile> {
  const optimistic = applyOptimisticCorrection(profile, task, label, author);
  onUpdate({ phase: 'optimistic', profile: optimistic });
  try {
    const confirmed = await client.submitCorrection({
      plate_id: profile.plate_id,
      task,
      label,
      author,
    });
    onUpdate({ phase: 'confirmed', profile: confirmed });
    return confirmed;
  } catch (error) {
    const detail = error instanceof ApiError ? error.detail : String(error);
    onUpdate({ phase: 'rolled_back', profile, error: detail });
    return profile;
  }
}

/** Labels an investigator may pick: canonical labels only, never aliases. */
export function selectableLabels(labels: string[] | undefined): string[] {
  return labels ? [...labels] : [];
}
