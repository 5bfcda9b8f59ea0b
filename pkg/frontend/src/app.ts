/**
 * DOM wiring for the curve studio: melody upload, two curve editors with
 * live validity badges, generation submit, result rendering (piano roll,
 * requested vs measured overlay, per-bar transposition badges), playback.
 */

import { GenerationClient, ServiceError } from "./api.js";
import { CurveEditorState, serializeCurve } from "./curve.js";
import { decodeBase64, parseMidi } from "./midi.js";
import {
  badgeLabels,
  barLines,
  drawCurve,
  drawRoll,
  pitchBounds,
  Viewport,
} from "./pianoroll.js";
import { Player } from "./playback.js";
import type { CurveKind, GenerationResult } from "./types.js";

interface Session {
  melodyB64: string | null;
  chords: string | null;
  melodySteps: number;
  tempoBpm: number;
  editors: Record<CurveKind, CurveEditorState | null>;
  result: GenerationResult | null;
  player: Player | null;
}

const session: Session = {
  melodyB64: null,
  chords: null,
  melodySteps: 0,
  tempoBpm: 120,
  editors: { valence: null, arousal: null },
  result: null,
  player: null,
};

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

function editorViewport(canvas: HTMLCanvasElement): Viewport {
  return {
    width: canvas.width,
    height: canvas.height,
    totalSteps: Math.max(1, session.melodySteps),
    pitchLo: 0,
    pitchHi: 127,
  };
}

function drawEditor(kind: CurveKind): void {
  const canvas = $<HTMLCanvasElement>(`${kind}-canvas`);
  const editor = session.editors[kind];
  const ctx = canvas.getContext("2d");
  if (!ctx || !editor) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const vp = editorViewport(canvas);
  ctx.strokeStyle = "#ddd";
  ctx.lineWidth = 1;
  for (const x of barLines(vp)) {
    ctx.beginPath();
    ctx.moveTo(x, 0);
    ctx.lineTo(x, canvas.height);
    ctx.stroke();
  }
  drawCurve(ctx, editor.toCurveJSON(), vp, kind === "valence" ? "#c2333f" : "#2f6fb2");
  ctx.fillStyle = "#333";
  for (const p of editor.points) {
    const x = (p.step / vp.totalSteps) * canvas.width;
    const y = (1 - p.value) * canvas.height;
    ctx.fillRect(x - 3, y - 3, 6, 6);
  }
  updateBadge(kind);
}

function updateBadge(kind: CurveKind): void {
  const editor = session.editors[kind];
  const badge = $(`${kind}-badge`);
  if (!editor) return;
  const v = editor.validity();
  badge.textContent = v.valid
    ? `ok (variance ${v.variance.toFixed(3)}, ${v.extremePointCount} extrema)`
    : v.reasons.join(", ");
  badge.className = v.valid ? "badge ok" : "badge bad";
  const submit = $<HTMLButtonElement>("submit");
  const allValid = (["valence", "arousal"] as CurveKind[])
    .every((k) => session.editors[k]?.validity().valid);
  submit.disabled = !(allValid && session.melodyB64 !== null);
}

function bindEditor(kind: CurveKind): void {
  const canvas = $<HTMLCanvasElement>(`${kind}-canvas`);
  let dragging = -1;
  const toCurveCoords = (ev: MouseEvent): [number, number] => {
    const rect = canvas.getBoundingClientRect();
    const step = ((ev.clientX - rect.left) / rect.width) * session.melodySteps;
    const value = 1 - (ev.clientY - rect.top) / rect.height;
    return [step, value];
  };
  canvas.addEventListener("mousedown", (ev) => {
    const editor = session.editors[kind];
    if (!editor) return;
    const [step, value] = toCurveCoords(ev);
    const hit = editor.points.findIndex(
      (p) => Math.abs(p.step - step) < session.melodySteps / 50);
    dragging = hit >= 0 ? hit
      : editor.points.indexOf(editor.addPoint(step, value));
    drawEditor(kind);
  });
  canvas.addEventListener("mousemove", (ev) => {
    if (dragging < 0) return;
    const editor = session.editors[kind];
    if (!editor) return;
    const [step, value] = toCurveCoords(ev);
    editor.movePoint(dragging, step, value);
    drawEditor(kind);
  });
  window.addEventListener("mouseup", () => (dragging = -1));
  canvas.addEventListener("dblclick", (ev) => {
    const editor = session.editors[kind];
    if (!editor) return;
    const [step] = toCurveCoords(ev);
    const hit = editor.points.findIndex(
      (p) => Math.abs(p.step - step) < session.melodySteps / 50);
    if (hit >= 0) editor.deletePoint(hit);
    drawEditor(kind);
  });
}

function showError(message: string): void {
  const banner = $("error-banner");
  banner.textContent = message;
  banner.style.display = message ? "block" : "none";
}

function renderResult(result: GenerationResult): void {
  session.result = result;
  const canvas = $<HTMLCanvasElement>("roll-canvas");
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);

  const acc = parseMidi(decodeBase64(result.accompaniment_midi));
  const [lo, hi] = pitchBounds(acc.notes);
  const vp: Viewport = {
    width: canvas.width, height: canvas.height,
    totalSteps: Math.max(acc.totalSteps, session.melodySteps),
    pitchLo: lo, pitchHi: hi,
  };
  drawRoll(ctx, acc.notes, vp);

  const overlay = $<HTMLCanvasElement>("overlay-canvas");
  const octx = overlay.getContext("2d");
  if (octx) {
    octx.clearRect(0, 0, overlay.width, overlay.height);
    const ovp: Viewport = { ...vp, width: overlay.width, height: overlay.height };
    for (const kind of ["valence", "arousal"] as CurveKind[]) {
      const editor = session.editors[kind];
      if (editor) {
        drawCurve(octx, editor.toCurveJSON(), ovp,
                  kind === "valence" ? "#c2333f" : "#2f6fb2", 2);
      }
      drawCurve(octx, result.measured_flow[kind], ovp,
                kind === "valence" ? "#e8a0a6" : "#9cc4e4", 1);
    }
  }

  const corr = result.correlation;
  $("correlation").textContent = corr.error
    ? `correlation unavailable: ${corr.error}`
    : `valence r=${corr.valence_r?.toFixed(3)} (${corr.valence_basis}), `
      + `arousal r=${corr.arousal_r?.toFixed(3)} (${corr.arousal_basis})`;
  $("badges").textContent = badgeLabels(result.transpositions).join("  ") || "no shifts";

  const AudioCtx = (window.AudioContext
    ?? (window as unknown as { webkitAudioContext?: typeof AudioContext }).webkitAudioContext);
  if (AudioCtx) {
    session.player = new Player(new AudioCtx(), acc.tempoBpm);
    session.player.addChannel("accompaniment", acc.notes);
    $<HTMLButtonElement>("play").disabled = false;
  } else {
    $<HTMLButtonElement>("play").disabled = true;
    $<HTMLButtonElement>("play").title = "audio not supported in this browser";
  }
}

export function initApp(baseUrl = ""): void {
  const client = new GenerationClient(baseUrl);

  $<HTMLInputElement>("melody-file").addEventListener("change", async (ev) => {
    const input = ev.target as HTMLInputElement;
    const file = input.files?.[0];
    if (!file) return;
    const bytes = new Uint8Array(await file.arrayBuffer());
    let b64 = "";
    bytes.forEach((b) => (b64 += String.fromCharCode(b)));
    session.melodyB64 = btoa(b64);
    const parsed = parseMidi(bytes);
    session.melodySteps = parsed.totalSteps;
    session.tempoBpm = parsed.tempoBpm;
    for (const kind of ["valence", "arousal"] as CurveKind[]) {
      session.editors[kind] = new CurveEditorState(kind, parsed.totalSteps);
      drawEditor(kind);
    }
    showError("");
  });

  $<HTMLTextAreaElement>("chords-text").addEventListener("input", (ev) => {
    session.chords = (ev.target as HTMLTextAreaElement).value || null;
  });

  bindEditor("valence");
  bindEditor("arousal");

  $<HTMLButtonElement>("submit").addEventListener("click", async () => {
    const valence = session.editors.valence;
    const arousal = session.editors.arousal;
    if (!valence || !arousal || !session.melodyB64) return;
    showError("");
    $("correlation").textContent = "generating...";
    try {
      const result = await client.generate({
        melody_midi: session.melodyB64,
        chords: session.chords ?? undefined,
        valence_curve: valence.toCurveJSON(),
        arousal_curve: arousal.toCurveJSON(),
        temperature: Number($<HTMLInputElement>("temperature").value),
        seed: Number($<HTMLInputElement>("seed").value),
        apply_rules: $<HTMLInputElement>("apply-rules").checked,
      });
      if (result) renderResult(result);
    } catch (err) {
      // state is preserved; the banner is non-blocking
      showError(err instanceof ServiceError
        ? `service rejected the request: ${err.reasons.join("; ")}`
        : `service unreachable: ${String(err)}`);
      $("correlation").textContent = "";
    }
  });

  $<HTMLButtonElement>("play").addEventListener("click", () => {
    const player = session.player;
    if (!player) return;
    if (player.playing) player.pause();
    else player.play();
  });
  $<HTMLButtonElement>("mute-acc").addEventListener("click", () => {
    const player = session.player;
    if (!player) return;
    const channel = player.channels.find((c) => c.name === "accompaniment");
    player.setMuted("accompaniment", !(channel?.muted ?? false));
  });

  $<HTMLButtonElement>("download").addEventListener("click", () => {
    if (!session.result) return;
    const bytes = decodeBase64(session.result.accompaniment_midi);
    const blob = new Blob([bytes.buffer as ArrayBuffer], { type: "audio/midi" });
    const a = document.createElement("a");
    a.href = URL.createObjectURL(blob);
    a.download = "accompaniment.mid";
    a.click();
  });

  client.health().then((h) => {
    $("health").textContent = `service ${h.status} (model ${h.model_version})`;
  }).catch(() => {
    $("health").textContent = "service unreachable";
  });

  // expose for the console and integration probes
  (window as unknown as { curveStudio: unknown }).curveStudio =
    { session, serializeCurve };
}

if (typeof document !== "undefined" && document.getElementById("melody-file")) {
  initApp();
}
