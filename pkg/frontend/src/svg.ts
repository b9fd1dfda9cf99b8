/** Minimal deterministic SVG string builder.
 *
 * All numbers are formatted with a fixed precision so renders are
 * byte-stable; no timestamps or generated ids ever enter the output.
 */

export function fmt(x: number): string {
  if (!Number.isFinite(x)) throw new Error(`non-finite coordinate: ${x}`);
  const s = x.toFixed(2);
  return s === "-0.00" ? "0.00" : s;
}

export type Attrs = Record<string, string | number>;

function attrString(attrs: Attrs): string {
  return Object.keys(attrs)
    .sort()
    .map((k) => ` ${k}="${attrs[k]}"`)
    .join("");
}

export function el(tag: string, attrs: Attrs, children: string[] = []): string {
  const inner = children.join("");
  return inner.length
    ? `<${tag}${attrString(attrs)}>${inner}</${tag}>`
    : `<${tag}${attrString(attrs)}/>`;
}

export function svgDocument(width: number, height: number, children: string[]): string {
  return el(
    "svg",
    {
      xmlns: "http://www.w3.org/2000/svg",
      viewBox: `0 0 ${fmt(width)} ${fmt(height)}`,
      width: fmt(width),
      height: fmt(height),
    },
    children,
  );
}

export function line(x1: number, y1: number, x2: number, y2: number, attrs: Attrs): string {
  return el("line", { x1: fmt(x1), y1: fmt(y1), x2: fmt(x2), y2: fmt(y2), ...attrs });
}

export function circle(cx: number, cy: number, r: number, attrs: Attrs): string {
  return el("circle", { cx: fmt(cx), cy: fmt(cy), r: fmt(r), ...attrs });
}

export function rect(x: number, y: number, w: number, h: number, attrs: Attrs): string {
  return el("rect", { x: fmt(x), y: fmt(y), width: fmt(w), height: fmt(h), ...attrs });
}

export function polyline(points: [number, number][], attrs: Attrs): string {
  const pts = points.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
  return el("polyline", { points: pts, fill: "none", ...attrs });
}

export function path(d: string, attrs: Attrs): string {
  return el("path", { d, ...attrs });
}

export function text(x: number, y: number, content: string, attrs: Attrs = {}): string {
  return el(
    "text",
    { x: fmt(x), y: fmt(y), "font-family": "sans-serif", ...attrs },
    [escapeXml(content)],
  );
}

export function group(attrs: Attrs, children: string[]): string {
  return el("g", attrs, children);
}

function escapeXml(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}
