// Context band under the detail chart: weather cells, calendar events, and
// user annotations for the focus window, at the granularity the service
// picked for the current zoom.

import type { ApiClient, ContextPayload } from "./api.js";
import { clearChildren, el, fmtInstant, numLabel, textLabel } from "./format.js";

export class ContextBand {
  readonly root: HTMLElement;
  private weatherRow: HTMLElement;
  private eventsRow: HTMLElement;
  private notesRow: HTMLElement;
  private form: HTMLElement;
  private api: ApiClient;
  private onAnnotated: () => void;

  constructor(root: HTMLElement, api: ApiClient, onAnnotated: () => void) {
    this.root = root;
    this.api = api;
    this.onAnnotated = onAnnotated;
    this.weatherRow = el("div", "ctx-weather");
    this.eventsRow = el("div", "ctx-events");
    this.notesRow = el("div", "ctx-notes");
    this.form = this.buildForm();
    root.append(this.weatherRow, this.eventsRow, this.notesRow, this.form);
  }

  private buildForm(): HTMLElement {
    const form = el("div", "note-form");
    const at = el("input") as HTMLInputElement;
    at.type = "text";
    at.placeholder = "2010-01-05T18:00:00+00:00";
    at.className = "note-at";
    const text = el("input") as HTMLInputElement;
    text.type = "text";
    text.placeholder = "what happened here?";
    text.className = "note-text";
    const btn = el("button", "note-add", "annotate");
    btn.addEventListener("click", () => {
      if (!at.value || !text.value) return;
      void this.api.addAnnotation(at.value, text.value).then(() => {
        text.value = "";
        this.onAnnotated();
      });
    });
    form.append(at, text, btn);
    return form;
  }

  render(payload: ContextPayload): void {
    clearChildren(this.weatherRow);
    this.weatherRow.append(el("span", "band-title",
      `weather (${payload.granularity})`));
    for (const cell of payload.weather_cells) {
      const chip = el("span", "weather-chip");
      chip.append(el("span", "lbl", fmtInstant(cell.cell_start) + " "));
      if (cell.mean_temp !== null) {
        chip.append(numLabel(cell.mean_temp, 1, "°"));
      }
      if (cell.mean_humidity !== null) {
        chip.append(el("span", "lbl", " rh "), numLabel(cell.mean_humidity, 0));
      }
      if (cell.dominant_condition !== null) {
        chip.append(el("span", "lbl", " "),
                    textLabel(cell.dominant_condition, "cond"));
      }
      this.weatherRow.append(chip);
    }

    clearChildren(this.eventsRow);
    this.eventsRow.append(el("span", "band-title", "calendar"));
    for (const ev of payload.events) {
      const chip = el("span", "event-chip");
      chip.append(
        textLabel(ev.title, "event-title"),
        el("span", "lbl", ` ${fmtInstant(ev.start)} to ${fmtInstant(ev.end)}`),
      );
      this.eventsRow.append(chip);
    }

    clearChildren(this.notesRow);
    this.notesRow.append(el("span", "band-title", "notes"));
    for (const note of payload.annotations) {
      const chip = el("span", "note-chip");
      chip.append(
        textLabel(note.text, "note-body"),
        el("span", "lbl", ` @ ${fmtInstant(note.at)}`),
      );
      this.notesRow.append(chip);
    }
  }
}
