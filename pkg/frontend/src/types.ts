/**
 * Types mirroring the query-service JSON API.
 *
 * The console is stateless with respect to truth: everything it displays
 * is decoded from one of these shapes.
 */

export type TaskName = 'make' | 'shape' | 'colour' | 'colour_binary';

export const ALL_TASKS: TaskName[] = ['make', 'shape', 'colour', 'colour_binary'];

export const NO_DETECTION = 'NO_DETECTION';

export interface Correction {
  label: string;
  author: string;
  corrected_at: string;
}

export interface TaskResult {
  backend_id: string | null;
  winner: string | null;
  tie_broken: boolean;
  counts: Record<string, number>;
  evidence: string[];
  correction: Correction | null;
  corrections: Correction[];
  effective_label: string | null;
}

export interface Sighting {
  captured_at: string;
  lat: number | null;
  lon: number | null;
}

export interface PredictionRow {
  record_id: string;
  plate_id: string;
  task: TaskName;
  backend_id: string;
  label: string;
  confidence: number;
  no_detection: boolean;
  error: string | null;
  produced_at: string;
}

export interface PlateProfile {
  plate_id: string;
  tasks: Partial<Record<TaskName, TaskResult>>;
  sightings: Sighting[];
  /** Present on the detail endpoint only. */
  evidence?: PredictionRow[];
}

export interface SearchResponse {
  total: number;
  items: PlateProfile[];
}

export interface TaxonomyDoc {
  task: TaskName;
  labels: string[];
  merge_map: Record<string, string>;
  min_plate_frequency: number;
  binary_map?: Record<string, string>;
}

export type TaxonomyMap = Partial<Record<TaskName, TaxonomyDoc>>;

export interface HealthResponse {
  status: string;
  plates: number;
}

export interface CorrectionRequest {
  plate_id: string;
  task: TaskName;
  label: string;
  author: string;
}
