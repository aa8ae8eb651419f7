/**
 * Faceted search view: filter panel and the paginated results grid.
 *
 * Render functions are pure (API response in, HTML out) so contract tests
 * can verify that every displayed row traces back to an API item.
 */

import type { SearchFilters } from './api.js';
import { ALL_TASKS, NO_DETECTION } from './types.js';
import type { PlateProfile, SearchResponse, TaskName, TaxonomyMap } from './types.js';

export function escapeHtml(text: string): string {
  return text
    .replaceAll('&', '&amp;')
    .replaceAll('<', '&lt;')
    .replaceAll('>', '&gt;')
    .replaceAll('"', '&quot;');
}

export function effectiveLabel(profile: PlateProfile, task: TaskName): string {
  const result = profile.tasks[task];
  if (!result) return '—';
  const label = result.effective_label ?? result.winner;
  if (!label || label === NO_DETECTION) return 'unknown';
  return label;
}

export function latestSighting(profile: PlateProfile): string {
  const last = profile.sightings[profile.sightings.length - 1];
  return last ? last.captured_at : '—';
}

/** One grid row per API item, in API order. */
export function renderResultsGrid(response: SearchResponse): string {
  if (response.items.length === 0) {
    return '<p class="empty-state">No matches for the current filters.</p>';
  }
  const head =
    '<tr><th>Plate</th><th>Make</th><th>Shape</th><th>Colour</th>' +
    '<th>Bright/Dark</th><th>Last seen</th></tr>';
  const rows = response.items.map((item) => {
    const cells = ALL_TASKS.map(
      (task) => `<td>${escapeHtml(effectiveLabel(item, task))}</td>`,
    ).join('');
    return (
      `<tr class="plate-row" data-plate="${escapeHtml(item.plate_id)}">` +
      `<td><a href="#plate/${encodeURIComponent(item.plate_id)}">` +
      `${escapeHtml(item.plate_id)}</a></td>` +
      cells +
      `<td>${escapeHtml(latestSighting(item))}</td></tr>`
    );
  });
  return (
    `<p class="result-count">${response.total} plate(s) matched</p>` +
    `<table class="results-grid"><thead>${head}</thead>` +
    `<tbody>${rows.join('')}</tbody></table>`
  );
}

/** Multi-select facet per task, labels taken from the served taxonomies. */
export function renderFilterPanel(taxonomies: TaxonomyMap): string {
  const sections = ALL_TASKS.filter((task) => taxonomies[task]).map((task) => {
    const doc = taxonomies[task]!;
    const options = doc.labels
      .map(
        (label) =>
          `<label><input type="checkbox" name="${task}" value="${escapeHtml(label)}">` +
          `${escapeHtml(label)}</label>`,
      )
      .join('');
    return `<fieldset class="facet" data-task="${task}"><legend>${task}</legend>${options}</fieldset>`;
  });
  return (
    '<form id="filter-panel">' +
    sections.join('') +
    '<fieldset class="facet"><legend>time</legend>' +
    '<label>from <input type="datetime-local" name="from"></label>' +
    '<label>to <input type="datetime-local" name="to"></label></fieldset>' +
    '<label class="unknown-toggle">' +
    '<input type="checkbox" name="include_unknown">include unknown</label>' +
    '<button type="submit">Search</button>' +
    '</form>'
  );
}

export interface PageState {
  offset: number;
  limit: number;
}

export function nextPage(state: PageState, total: number): PageState | null {
  const offset = state.offset + state.limit;
  return offset < total ? { ...state, offset } : null;
}

export function previousPage(state: PageState): PageState | null {
  if (state.offset === 0) return null;
  return { ...state, offset: Math.max(0, state.offset - state.limit) };
}

/** Filters as consumed by the API client, from raw form values. */
export function filtersFromForm(
  selected: Partial<Record<TaskName, string[]>>,
  includeUnknown: boolean,
  page: PageState,
  window?: { from?: string; to?: string },
): SearchFilters {
  return {
    ...selected,
    includeUnknown,
    offset: page.offset,
    limit: page.limit,
    from: window?.from,
    to: window?.to,
  };
}
