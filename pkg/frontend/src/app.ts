/** Wiring between the endpoints and the page.
 *
 * State is whatever the endpoint last said, re-fetched after every change.
 * A toggle response does carry the updated entry, but re-fetching both
 * documents keeps every rendered location of a deduplicated entry in step
 * with the server, including ones this click did not touch.
 */

import { ApiError, fetchPreview, fetchReport, postConfirm, postToggle } from "./api.js";
import { render } from "./render.js";
import type { Actions, AppState } from "./render.js";

export type { AppState } from "./render.js";

export interface AppController {
  state: AppState;
  refresh(): Promise<void>;
  toggle(entryId: number, toPublic: boolean): Promise<void>;
  confirm(): Promise<void>;
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return err.message;
  return String(err);
}

export async function initApp(root: HTMLElement, base = ""): Promise<AppController> {
  const state: AppState = {
    report: null,
    preview: null,
    sharedPath: null,
    warnings: [],
    error: null,
    busy: false,
  };

  const actions: Actions = {
    toggle: (entryId, toPublic) => void toggle(entryId, toPublic),
    confirm: () => void confirm(),
  };
  const paint = () => render(root, state, actions);

  async function refresh(): Promise<void> {
    const [report, preview] = await Promise.all([
      fetchReport(base),
      fetchPreview(base),
    ]);
    state.report = report;
    state.preview = preview;
    if (report.confirmed && state.sharedPath === null) {
      state.sharedPath = report.out_path;
    }
    paint();
  }

  async function toggle(entryId: number, toPublic: boolean): Promise<void> {
    if (state.busy) return;
    state.busy = true;
    try {
      await postToggle(base, entryId, toPublic);
      state.error = null;
    } catch (err) {
      state.error = describe(err);
    } finally {
      state.busy = false;
    }
    await refresh();
  }

  async function confirm(): Promise<void> {
    if (state.busy) return;
    state.busy = true;
    try {
      const result = await postConfirm(base);
      state.sharedPath = result.shared_path;
      state.warnings = result.warnings;
      state.error = null;
    } catch (err) {
      state.error = describe(err);
    } finally {
      state.busy = false;
    }
    await refresh();
  }

  paint();
  await refresh();
  return { state, refresh, toggle, confirm };
}
