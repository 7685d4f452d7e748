"""
Observability Analysis API

This Flask API exposes the analysis, design and estimation engines over
JSON so dashboards and notebooks can query them without the CLI.

Endpoints:
- /health: Health check
- /reference-systems: Bundled reference system documents
- /analyze: Observability and functional-observability report
- /design: Certified sampling schedule for a target
- /estimate: Sliding-window least-squares run (summary plus time series)

Errors are returned as {"error": ...}: input problems with 400, design and
certificate failures with 422, anything unexpected with 500.
"""

import logging
import os
import uuid
from typing import Any, Dict, Optional, Tuple

import numpy as np
from flask import Flask, Response, jsonify, request
from flask_cors import CORS
from werkzeug.exceptions import HTTPException

import obsvkit_config as config
import reference_systems as refs
from least_squares_estimator import run_to_frame, simulate_run
from obsvkit_cli import analyze, certificate_from_report, dumps
from obsvkit_errors import DesignFailure, MissingCertificate, NumericalInconsistency, ObsvkitError, RankDeficientRegressor
from observability import observable_decomposition
from sampling_design import TARGETS, design_for_target
from system_model import parse_sampling, parse_system

logger = logging.getLogger(__name__)

app = Flask(__name__)
CORS(app)
app.config["MAX_CONTENT_LENGTH"] = 2 * 1024 * 1024


def _json_response(document: Any, status: int = 200) -> Response:
    return Response(dumps(document), status=status, mimetype="application/json")


def _request_body() -> Dict[str, Any]:
    data = request.get_json(silent=True)
    if not isinstance(data, dict):
        raise ValueError("request body must be a JSON object")
    return data


def _optional_number(data: Dict[str, Any], key: str, kind=float) -> Optional[Any]:
    value = data.get(key)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"{key} must be a number")
    if not np.isfinite(value):
        raise ValueError(f"{key} must be finite")
    if kind is int and float(value) != int(value):
        raise ValueError(f"{key} must be an integer, got {value}")
    return kind(value)


def _error_response(e: Exception, request_id: str) -> Tuple[Response, int]:
    if isinstance(e, HTTPException):
        status = e.code or 500
    elif isinstance(e, (DesignFailure, MissingCertificate, RankDeficientRegressor)):
        status = 422
    elif isinstance(e, NumericalInconsistency):
        status = 500
    elif isinstance(e, (ObsvkitError, ValueError)):
        status = 400
    else:
        status = 500
    if status == 500:
        logger.exception("[%s] request failed", request_id)
    else:
        logger.info("[%s] request rejected: %s", request_id, e)
    payload: Dict[str, Any] = {"error": str(e), "type": type(e).__name__}
    if isinstance(e, DesignFailure) and e.diagnostics:
        payload["diagnostics"] = e.diagnostics
    if isinstance(e, RankDeficientRegressor):
        payload["window"] = e.window
    return _json_response(payload, status), status


@app.errorhandler(413)
def request_too_large(e):
    return _json_response({'error': 'request body too large', 'type': 'RequestEntityTooLarge'}, 413)


@app.route('/health', methods=['GET'])
def health_check():
    return jsonify({'status': 'healthy', 'service': 'obsvkit'})


@app.route('/reference-systems', methods=['GET'])
def reference_systems():
    return _json_response({'systems': refs.catalog()})


@app.route('/analyze', methods=['POST'])
def analyze_endpoint():
    """
    Body: {"system": {...}, "sampling": {"times": [...]} (optional), "tol": float (optional)}
    """
    request_id = uuid.uuid4().hex[:8]
    try:
        data = _request_body()
        sys_ = parse_system(data.get('system'))
        seq = parse_sampling(data['sampling'], sys_.domain) if data.get('sampling') is not None else None
        tol = _optional_number(data, 'tol')
        report, consistent = analyze(sys_, seq, tol=tol)
        report['consistent'] = consistent
        logger.info("[%s] analyzed n=%d system", request_id, sys_.n)
        return _json_response(report)
    except Exception as e:
        return _error_response(e, request_id)


@app.route('/design', methods=['POST'])
def design_endpoint():
    """
    Body: {"system": {...}, "target": str, "T": float, "k": int, "seed": int,
           "strategy": "uniform"|"random", "s_max": int, "report": {...analyze report}}
    """
    request_id = uuid.uuid4().hex[:8]
    try:
        data = _request_body()
        sys_ = parse_system(data.get('system'))
        target = data.get('target', 'observable_subspace')
        if target not in TARGETS:
            raise ValueError(f"target must be one of {', '.join(TARGETS)}")
        certificate = None
        if isinstance(data.get('report'), dict):
            certificate = certificate_from_report(data['report'], target)
        design = design_for_target(
            sys_, target=target, T=_optional_number(data, 'T'), k=_optional_number(data, 'k', int),
            seed=_optional_number(data, 'seed', int) or config.DEFAULT_SEED,
            strategy=data.get('strategy', 'uniform'), s_max=_optional_number(data, 's_max', int),
            certificate=certificate)
        logger.info("[%s] designed %s schedule with %d samples", request_id, target, design.k)
        return _json_response(design.to_dict())
    except Exception as e:
        return _error_response(e, request_id)


@app.route('/estimate', methods=['POST'])
def estimate_endpoint():
    """
    Body: {"system": {...}, "sampling": {...}, "x0": [...], "noise": float, "seed": int,
           "window": int, "horizon": float, "mode": "full"|"reduced", "report": {...}}
    """
    request_id = uuid.uuid4().hex[:8]
    try:
        data = _request_body()
        sys_ = parse_system(data.get('system'))
        seq = parse_sampling(data.get('sampling'), sys_.domain)
        x0 = data.get('x0')
        x0 = config.default_initial_state(sys_.n) if x0 is None else np.asarray(x0, dtype=float)
        mode = data.get('mode', 'full')
        certificate = None
        if mode == 'reduced':
            report = data.get('report') or {}
            certificate = certificate_from_report(report, 'functional_via_C')
            if certificate is None:
                certificate = certificate_from_report(report, 'functional_via_Q')
        window = _optional_number(data, 'window', int)
        if window is None:
            decomp = observable_decomposition(sys_.A, sys_.require_F() if mode == 'reduced' else sys_.C)
            window = max(1, decomp.n_ob)
        run = simulate_run(sys_, x0, seq, window, noise_bound=_optional_number(data, 'noise') or 0.0,
                           seed=_optional_number(data, 'seed', int) or config.DEFAULT_SEED,
                           horizon=_optional_number(data, 'horizon'), mode=mode, certificate=certificate)
        frame = run_to_frame(run)
        logger.info("[%s] estimated %d query times", request_id, len(frame))
        return _json_response({'summary': run.summary(), 'series': frame.to_dict(orient='list')})
    except Exception as e:
        return _error_response(e, request_id)


if __name__ == '__main__':
    config.configure_logging()
    port = config.api_port()
    app.run(host='localhost', port=port, debug=os.environ.get('FLASK_DEBUG') == '1')
