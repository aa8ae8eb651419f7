/**
 * Plate evidence review: winners with vote breakdowns, tie badges,
 * per-image predictions, correction history, and the sighting timeline.
 */

import { escapeHtml } from './search.js';
import { ALL_TASKS, NO_DETECTION } from './types.js';
import type { PlateProfile, TaskName, TaskResult } from './types.js';

/** "Mercedes — 3 of 4 votes" for a tallied task. */
export function voteSummary(result: TaskResult): string {
  const totalVotes = Object.values(result.counts).reduce((a, b) => a + b, 0);
  if (!result.winner || totalVotes === 0) return 'no result';
  const winnerVotes = result.counts[result.winner] ?? 0;
  const label = result.winner === NO_DETECTION ? 'unknown' : result.winner;
  return `${label} — ${winnerVotes} of ${totalVotes} votes`;
}

export function renderVoteBreakdown(result: TaskResult): string {
  const entries = Object.entries(result.counts).sort(
    (a, b) => b[1] - a[1] || a[0].localeCompare(b[0]),
  );
  const items = entries.map(
    ([label, count]) =>
      `<li>${escapeHtml(label === NO_DETECTION ? 'no detection' : label)}: ${count}</li>`,
  );
  return `<ul class="vote-breakdown">${items.join('')}</ul>`;
}

export function renderCorrectionHistory(result: TaskResult): string {
  if (result.corrections.length === 0) return '';
  // newest first for review
  const items = [...result.corrections]
    .reverse()
    .map(
      (c) =>
        `<li>${escapeHtml(c.label)} by ${escapeHtml(c.author)} at ${escapeHtml(
          c.corrected_at,
        )}</li>`,
    );
  return `<ol class="correction-history">${items.join('')}</ol>`;
}

function renderTaskSection(task: TaskName, result: TaskResult): string {
  const badge = result.tie_broken
    ? '<span class="badge tie-badge" title="winner decided by tie-break">tie-break</span>'
    : '';
  const corrected = result.correction
    ? `<span class="badge corrected-badge">corrected: ${escapeHtml(result.correction.label)}</span>`
    : '';
  return (
    `<section class="task-result" data-task="${task}">` +
    `<h3>${task}</h3>` +
    `<p class="vote-summary">${escapeHtml(voteSummary(result))}${badge}${corrected}</p>` +
    renderVoteBreakdown(result) +
    renderCorrectionHistory(result) +
    '</section>'
  );
}

export function renderSightings(profile: PlateProfile): string {
  if (profile.sightings.length === 0) return '<p class="no-sightings">No sightings.</p>';
  const items = profile.sightings.map((s) => {
    const where = s.lat !== null && s.lon !== null ? ` @ (${s.lat}, ${s.lon})` : '';
    return `<li>${escapeHtml(s.captured_at)}${escapeHtml(where)}</li>`;
  });
  return `<ol class="sighting-timeline">${items.join('')}</ol>`;
}

export function renderEvidence(profile: PlateProfile): string {
  const rows = (profile.evidence ?? []).map(
    (p) =>
      `<tr><td>${escapeHtml(p.record_id)}</td><td>${p.task}</td>` +
      `<td>${escapeHtml(p.no_detection ? 'no detection' : p.label)}</td>` +
      `<td>${p.confidence.toFixed(2)}</td></tr>`,
  );
  if (rows.length === 0) return '';
  return (
    '<table class="evidence"><thead>' +
    '<tr><th>Image</th><th>Task</th><th>Prediction</th><th>Confidence</th></tr>' +
    `</thead><tbody>${rows.join('')}</tbody></table>`
  );
}

export function renderPlateDetail(profile: PlateProfile): string {
  const sections = ALL_TASKS.filter((task) => profile.tasks[task]).map((task) =>
    renderTaskSection(task, profile.tasks[task]!),
  );
  return (
    `<article class="plate-detail" data-plate="${escapeHtml(profile.plate_id)}">` +
    `<h2>${escapeHtml(profile.plate_id)}</h2>` +
    sections.join('') +
    '<h3>Sightings</h3>' +
    renderSightings(profile) +
    '<h3>Per-image evidence</h3>' +
    renderEvidence(profile) +
    '</article>'
  );
}
