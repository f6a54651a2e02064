// Histogram rendering. The bar model is a pure function so the chart can be
// unit-tested without a DOM; the SVG string on top of it is presentation.

export interface Bucket {
  label: string;
  count: number;
}

export interface Bar extends Bucket {
  /** 0..1, relative to the tallest bucket (0 when everything is empty). */
  frac: number;
}

export function histogramBars(buckets: Bucket[]): Bar[] {
  const peak = Math.max(0, ...buckets.map((b) => b.count));
  return buckets.map((b) => ({
    label: b.label,
    count: b.count,
    frac: peak === 0 ? 0 : b.count / peak,
  }));
}

const escapeHtml = (s: string) =>
  s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");

export function renderHistogram(buckets: Bucket[], title = ""): string {
  const bars = histogramBars(buckets);
  const rows = bars
    .map(
      (bar) => `
      <div class="hist-row">
        <span class="hist-label" title="${escapeHtml(bar.label)}">${escapeHtml(bar.label)}</span>
        <span class="hist-track"><span class="hist-bar" style="width:${(bar.frac * 100).toFixed(1)}%"></span></span>
        <span class="hist-count">${bar.count}</span>
      </div>`,
    )
    .join("");
  const total = buckets.reduce((acc, b) => acc + b.count, 0);
  const heading = title
    ? `<div class="hist-title">${escapeHtml(title)} <span class="muted">(${total} responses)</span></div>`
    : "";
  return `<div class="hist">${heading}${rows || '<div class="muted">no data</div>'}</div>`;
}
