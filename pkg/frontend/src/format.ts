// Single choke point for numeric labels. Every number the dashboard renders
// goes through numLabel, which stamps the untouched payload value onto the
// element as data-raw. Display text may round; data-raw never does, so a page
// audit can match each label back to the API field it came from.

export function numLabel(value: number, digits = 2, suffix = ""): HTMLElement {
  const span = document.createElement("span");
  span.className = "num";
  span.dataset.raw = String(value);
  span.textContent = value.toFixed(digits) + suffix;
  return span;
}

/** Label carrying a payload string verbatim (conditions, ids, titles). */
export function textLabel(value: string, cls = "txt"): HTMLElement {
  const span = document.createElement("span");
  span.className = cls;
  span.textContent = value;
  return span;
}

/** Instants are shown as trimmed ISO; they are time axes, not measurements. */
export function fmtInstant(iso: string): string {
  return iso.replace(/:00(\+00:00|Z)$/, "").replace("T", " ");
}

export function clearChildren(el: HTMLElement): void {
  while (el.firstChild) el.removeChild(el.firstChild);
}

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K, cls?: string, text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (cls) node.className = cls;
  if (text !== undefined) node.textContent = text;
  return node;
}
