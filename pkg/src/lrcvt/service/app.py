"""HTTP/JSON facade over a tessellated dataset.

The dataset is immutable and shared; per-session selection and plot state
mutate under that session's lock. Plot requests flagged as part of an active
zoom/pan gesture are answered with histogram payloads regardless of the
configured model, and locked plots are served from the cached payload without
recomputation.
"""

from __future__ import annotations

import secrets
import threading
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from ..stats import (
    accumulate,
    fit_gmm,
    histogram1d,
    kde_density,
    kde_model,
    moments_latex,
    moments_report,
    plot_data,
)
from .data import Dataset
from .models import (
    ErrorBody,
    MetaResponse,
    PlotConfigRequest,
    SelectionRequest,
    SelectionResponse,
    SessionResponse,
)
from .state import ServiceError, SessionState, apply_selection

MODEL_MODES = ("kde", "gmm")
PLOT_MODES = ("scatter", "hist1d", "hist2d", "cdf", "conditional1d", "conditional2d")
BACKGROUND_SCATTER_CAP = 1500


def create_app(dataset: Dataset, static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="lrcvt explorer", version="0.1.0")
    sessions: dict[str, SessionState] = {}
    sessions_lock = threading.Lock()

    def session(token: str) -> SessionState:
        with sessions_lock:
            if token not in sessions:
                sessions[token] = SessionState()
                if not sessions[token].plot.x:
                    x, y = dataset.field_pair_default()
                    sessions[token].plot.x = x
                    sessions[token].plot.y = y
            return sessions[token]

    @app.exception_handler(ServiceError)
    async def _service_error(_req: Request, exc: ServiceError):
        return JSONResponse(
            status_code=exc.status,
            content=ErrorBody(code=exc.code, message=exc.message).model_dump(),
        )

    @app.exception_handler(ValueError)
    async def _value_error(_req: Request, exc: ValueError):
        return JSONResponse(
            status_code=400,
            content=ErrorBody(code="bad_request", message=str(exc)).model_dump(),
        )

    @app.post("/session", response_model=SessionResponse)
    def new_session():
        token = secrets.token_hex(8)
        session(token)
        return SessionResponse(token=token)

    @app.get("/meta", response_model=MetaResponse)
    def meta(session_token: str = Query("default", alias="session")):
        st = session(session_token)
        h = dataset.header
        return MetaResponse(
            dims=list(h.dims),
            spacing=list(h.spacing),
            fields=h.field_names,
            iso_field=h.iso_field,
            iso_values=h.iso_values,
            n_layers=len(h.layers),
            n_components=len(h.components),
            n_regions=len(h.regions),
            n_records=h.n_records,
            small_component_threshold=dataset.small_threshold,
            session=st.snapshot(),
        )

    @app.get("/hierarchy")
    def hierarchy(
        metric_x: str | None = None,
        metric_y: str | None = None,
        moment: str = "mu_22",
    ):
        tree = dataset.hierarchy()
        if metric_x and metric_y:
            metric = dataset.component_metric(metric_x, metric_y, moment)
            for layer in tree["layers"]:
                for comp in layer["components"]:
                    val = metric.get(comp["id"], float("nan"))
                    comp["metric"] = None if np.isnan(val) else val
        return tree

    @app.get("/projection/{level}")
    def projection(
        level: str,
        method: str = "mds",
        metric: str = "stats",
        x: str | None = None,
        y: str | None = None,
        seed: int = 0,
        invert_fold: bool = True,
        session_token: str = Query("default", alias="session"),
    ):
        st = session(session_token)
        points = dataset.projection(
            level, method=method, metric=metric, x=x, y=y, seed=seed,
            invert_fold=invert_fold,
        )
        selected = set(st.selections.get(level, []))
        return {
            "level": level,
            "method": method,
            "metric": metric,
            "points": [dict(p, selected=p["id"] in selected) for p in points],
        }

    @app.post("/selection/{level}", response_model=SelectionResponse)
    def selection(
        level: str,
        body: SelectionRequest,
        session_token: str = Query("default", alias="session"),
    ):
        st = session(session_token)
        with st.lock:
            result = apply_selection(st, level, body.ids, body.op, dataset)
            st.cached_plot = None if not st.plot.locked else st.cached_plot
        return SelectionResponse(**result)

    def _scope_samples(st: SessionState, x: str, y: str, z: str | None = None):
        ids = dataset.scope_record_ids(st.selections)
        if ids.size == 0:
            raise ServiceError(404, "empty_selection", "selection holds no voxels")
        names = [x, y] + ([z] if z else [])
        for n in names:
            if n not in dataset.field_names:
                raise ServiceError(404, "unknown_field", f"unknown field '{n}'")
        return dataset.samples(ids, names)

    def _background(st: SessionState, x: str, y: str) -> dict:
        ids = dataset.parent_scope_record_ids(st.selections)
        if ids.size == 0:
            return {}
        samples = dataset.samples(ids, [x, y])
        step = max(1, samples.shape[0] // BACKGROUND_SCATTER_CAP)
        hx = histogram1d(samples[:, 0], bins=64)
        hy = histogram1d(samples[:, 1], bins=64)
        return {
            "scatter": samples[::step].tolist(),
            "x_hist": {"lo": hx.lo, "hi": hx.hi, "counts": hx.counts.tolist()},
            "y_hist": {"lo": hy.lo, "hi": hy.hi, "counts": hy.counts.tolist()},
            "n": int(samples.shape[0]),
        }

    def _model_payload(samples, mode: str, st: SessionState) -> dict:
        if mode == "kde":
            payload = kde_density(samples, "scott")
            payload["mode"] = "kde"
            payload["x_range"] = [float(samples[:, 0].min()), float(samples[:, 0].max())]
            payload["y_range"] = [float(samples[:, 1].min()), float(samples[:, 1].max())]
            return payload
        model = fit_gmm(samples, k=min(st.plot.k, max(1, samples.shape[0] - 1)), seed=0)
        payload = model.to_dict()
        payload["mode"] = "gmm"
        payload["x_range"] = [float(samples[:, 0].min()), float(samples[:, 0].max())]
        payload["y_range"] = [float(samples[:, 1].min()), float(samples[:, 1].max())]
        return payload

    @app.get("/plot")
    def plot(
        mode: str | None = None,
        x: str | None = None,
        y: str | None = None,
        z: str | None = None,
        zooming: bool = False,
        bins: int | None = None,
        session_token: str = Query("default", alias="session"),
    ):
        st = session(session_token)
        with st.lock:
            cfg = st.plot
            mode = mode or cfg.mode
            x = x or cfg.x
            y = y or cfg.y
            if mode not in PLOT_MODES + MODEL_MODES:
                raise ServiceError(404, "bad_mode", f"unknown plot mode '{mode}'")

            if cfg.locked and st.cached_plot is not None:
                return dict(st.cached_plot, cached=True)

            requested = mode
            if zooming and mode in MODEL_MODES:
                # model layers are too slow to refit mid-gesture; serve the
                # histogram stand-in until the gesture ends
                mode = "hist2d"

            if mode == "conditional2d" and z is None:
                others = [n for n in dataset.field_names if n not in (x, y)]
                z = others[0] if others else y

            samples = _scope_samples(st, x, y, z if mode == "conditional2d" else None)
            if mode in MODEL_MODES:
                payload = _model_payload(samples, mode, st)
            else:
                payload = plot_data(
                    samples,
                    mode,
                    bins=bins or cfg.bins,
                    x_range=tuple(cfg.x_range) if cfg.x_range else None,
                    y_range=tuple(cfg.y_range) if cfg.y_range else None,
                )
            if mode == "scatter":
                # voxel ids aligned with the points, so a lasso over the
                # scatter can select voxels directly
                payload["ids"] = dataset.scope_record_ids(st.selections).tolist()
            payload["x"] = x
            payload["y"] = y
            payload["requested_mode"] = requested
            payload["served_as"] = mode
            payload["zooming"] = zooming
            payload["background"] = _background(st, x, y)
            if cfg.locked and st.cached_plot is None:
                st.cached_plot = payload
        return payload

    @app.post("/plot/config")
    def plot_config(
        body: PlotConfigRequest,
        session_token: str = Query("default", alias="session"),
    ):
        st = session(session_token)
        with st.lock:
            cfg = st.plot
            for name in ("mode", "x", "y", "x_range", "y_range", "bins", "k"):
                val = getattr(body, name)
                if val is not None:
                    setattr(cfg, name, val)
            if body.locked is not None:
                cfg.locked = body.locked
                st.cached_plot = None  # recache on the next plot request
            return {"plot": st.snapshot()["plot"]}

    @app.get("/moments")
    def moments(
        model: str = "gmm",
        x: str | None = None,
        y: str | None = None,
        k: int | None = None,
        bins: int = 48,
        session_token: str = Query("default", alias="session"),
    ):
        st = session(session_token)
        x = x or st.plot.x
        y = y or st.plot.y
        samples = _scope_samples(st, x, y)
        raw = accumulate(samples, x, y)
        if model == "gmm":
            fitted = fit_gmm(samples, k=k or st.plot.k, seed=0)
        elif model == "kde":
            fitted = kde_model(samples, "scott")
        elif model in ("hist", "histogram"):
            from ..stats import histogram2d

            fitted = histogram2d(samples, bins=(bins, bins))
        else:
            raise ServiceError(404, "bad_model", f"unknown model '{model}'")
        rows = moments_report(fitted, raw)
        return {
            "model": model,
            "x": x,
            "y": y,
            "n": int(samples.shape[0]),
            "rows": rows,
            "latex": moments_latex(rows, x, y),
        }

    @app.get("/voxels")
    def voxels(
        limit: int = 5000,
        session_token: str = Query("default", alias="session"),
    ):
        st = session(session_token)
        ids = dataset.scope_record_ids(st.selections)
        return {
            "n": int(ids.size),
            "voxels": dataset.voxel_detail(ids, limit=limit),
        }

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
