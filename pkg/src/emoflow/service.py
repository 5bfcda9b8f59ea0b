"""HTTP generation service: melody + curves in, accompaniment + measured flow out.

All endpoints live under /v1 and speak JSON; MIDI travels base64-encoded.
Request validation is total: malformed MIDI, bad curve JSON, or a curve
failing the ebb-and-flow gate all come back as a 400 with a structured
``reasons`` array, an over-long melody is a 413, and a missing checkpoint
is a 503.  The loaded model is immutable, so concurrent generations are
independent.
"""

from __future__ import annotations

import base64
import binascii
import os
import threading
import time
from typing import Any

from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import emotion, pipeline, score_io
from .emotion import EmotionCurve
from .rules import TranspositionPolicy
from .vamodel import load_checkpoint

DEFAULT_MAX_BARS = 128

# environment defaults, read once at startup
ENV_CHECKPOINT = "EMOFLOW_CHECKPOINT"
ENV_PORT = "EMOFLOW_PORT"
ENV_POOL_SIZE = "EMOFLOW_POOL_SIZE"
ENV_MAX_BARS = "EMOFLOW_MAX_BARS"


class CurveModel(BaseModel):
    kind: str
    horizon: int
    samples: list[tuple[int, float]]

    def to_curve(self) -> EmotionCurve:
        return EmotionCurve(self.kind, [tuple(s) for s in self.samples], self.horizon)

    @classmethod
    def from_curve(cls, c: EmotionCurve) -> "CurveModel":
        return cls(kind=c.kind, horizon=c.horizon, samples=c.samples)


class GenerationRequestModel(BaseModel):
    melody_midi: str = Field(description="base64-encoded Standard MIDI File")
    chords: str | None = Field(default=None, description="chord annotation text")
    valence_curve: CurveModel
    arousal_curve: CurveModel
    temperature: float = 0.0
    seed: int = 0
    apply_rules: bool = True


class TranspositionModel(BaseModel):
    bar: int
    shift: int
    similarity: float
    selected: bool


class CorrelationModel(BaseModel):
    valence_r: float | None = None
    arousal_r: float | None = None
    valence_basis: str | None = None
    arousal_basis: str | None = None
    error: str | None = None


class GenerationResultModel(BaseModel):
    accompaniment_midi: str
    measured_flow: dict[str, CurveModel]
    correlation: CorrelationModel
    transpositions: list[TranspositionModel]
    model_version: str


def _bad_request(reasons: list[str]):
    raise HTTPException(status_code=400, detail={"reasons": reasons})


def create_app(checkpoint_path=None, max_bars: int | None = None,
               policy: TranspositionPolicy | None = None,
               pool_size: int | None = None) -> FastAPI:
    if checkpoint_path is None:
        checkpoint_path = os.environ.get(ENV_CHECKPOINT) or None
    if max_bars is None:
        max_bars = int(os.environ.get(ENV_MAX_BARS, DEFAULT_MAX_BARS))
    if pool_size is None:
        pool_size = int(os.environ.get(ENV_POOL_SIZE, 0)) or (os.cpu_count() or 1)

    app = FastAPI(title="emoflow generation service", version="1")
    state: dict[str, Any] = {
        "model": None,
        "version": "none",
        "started": time.monotonic(),
        # bounded pool: caps concurrent generations to limit memory
        "pool": threading.Semaphore(pool_size),
    }
    if checkpoint_path is not None:
        model, manifest = load_checkpoint(checkpoint_path)
        state["model"] = model
        state["version"] = manifest.get("model_version", "unknown")

    @app.exception_handler(HTTPException)
    async def handle_http(request, exc: HTTPException):
        detail = exc.detail if isinstance(exc.detail, dict) else {"reasons": [str(exc.detail)]}
        return JSONResponse(status_code=exc.status_code, content=detail)

    @app.get("/v1/health")
    def health():
        loaded = state["model"] is not None
        return {
            "status": "ok" if loaded else "degraded",
            "model_version": state["version"],
            "uptime_seconds": time.monotonic() - state["started"],
        }

    @app.post("/v1/generate", response_model=GenerationResultModel)
    def generate(request: GenerationRequestModel):
        if state["model"] is None:
            raise HTTPException(status_code=503, detail={"reasons": ["model not loaded"]})
        if request.temperature < 0:
            _bad_request(["temperature must be >= 0"])

        reasons: list[str] = []
        try:
            midi_bytes = base64.b64decode(request.melody_midi, validate=True)
        except (binascii.Error, ValueError):
            _bad_request(["melody_midi is not valid base64"])
        try:
            ts = score_io.parse_midi(midi_bytes)
        except score_io.ScoreError as exc:
            _bad_request([f"invalid MIDI: {exc}"])

        curves = {}
        for name, payload in (("valence", request.valence_curve),
                              ("arousal", request.arousal_curve)):
            try:
                curve = payload.to_curve()
            except ValueError as exc:
                reasons.append(f"{name} curve: {exc}")
                continue
            if curve.kind != name:
                reasons.append(f"{name} curve: kind is {curve.kind!r}")
                continue
            report = emotion.validate_curve(curve)
            if not report.valid:
                reasons.extend(f"{name} curve: {r}" for r in report.reasons)
            curves[name] = curve
        if reasons:
            _bad_request(reasons)

        if request.chords:
            try:
                chords = score_io.parse_chord_annotations(
                    request.chords, tempo_bpm=ts.tempo_bpm, total_steps=ts.num_steps)
            except score_io.ScoreError as exc:
                _bad_request([f"invalid chord annotations: {exc}"])
            ts = score_io.with_chords(ts, chords)
        if not ts.chords.has_chord().any():
            _bad_request(["chords required: no annotation text and none embedded"])

        if ts.num_steps > max_bars * ts.bars.steps_per_bar:
            raise HTTPException(status_code=413, detail={
                "reasons": [f"melody exceeds {max_bars} bars"]})

        try:
            with state["pool"]:
                out = pipeline.generate(
                    state["model"], ts, curves["valence"], curves["arousal"],
                    temperature=request.temperature, seed=request.seed,
                    apply_rules=request.apply_rules, policy=policy)
        except pipeline.PipelineError as exc:
            _bad_request([str(exc)])

        correlation = CorrelationModel(error=out.correlation_error)
        if out.correlation is not None:
            correlation = CorrelationModel(
                valence_r=out.correlation.valence_r,
                arousal_r=out.correlation.arousal_r,
                valence_basis=out.correlation.valence_basis,
                arousal_basis=out.correlation.arousal_basis)

        midi_out = score_io.write_midi(out.accompaniment, tempo_bpm=ts.tempo_bpm)
        return GenerationResultModel(
            accompaniment_midi=base64.b64encode(midi_out).decode("ascii"),
            measured_flow={
                "valence": CurveModel.from_curve(out.measured_valence),
                "arousal": CurveModel.from_curve(out.measured_arousal),
            },
            correlation=correlation,
            transpositions=[TranspositionModel(**d.to_dict()) for d in out.transpositions],
            model_version=state["version"],
        )

    return app
