# routes/experiments.py
import logging
import os
import re

from flask import Blueprint, abort, current_app, jsonify, request

from models.config import DEFAULTS, config_from_mapping
from models.errors import ConfigError
from models.experiments import PRESETS, run_experiment, run_id_for
from models.fieldio import read_json

bp = Blueprint("experiments", __name__, url_prefix="/experiments")

logger = logging.getLogger(__name__)

RUN_ID = re.compile(r"^[a-z0-9-]+-[0-9a-f]{12}$")


def _runs_root() -> str:
    return os.path.abspath(current_app.config.get("SP2D_OUTPUT_DIR", "runs"))


def run_dir_for(run_id: str) -> str:
    """Directory of a run; 404 for ids that do not look like ours."""
    if not RUN_ID.match(run_id or ""):
        abort(404)
    return os.path.join(_runs_root(), run_id)


@bp.route("/presets", methods=["GET"])
def list_presets():
    defaults = {k: list(v) if isinstance(v, tuple) else v for k, v in DEFAULTS.items()}
    return jsonify(presets=sorted(PRESETS), defaults=defaults)


@bp.route("/<preset>", methods=["POST"])
def start_run(preset):
    if preset not in PRESETS:
        abort(404)
    overrides = request.get_json(silent=True)
    if overrides is None:
        overrides = {}
    if not isinstance(overrides, dict):
        raise ConfigError("request body must be a JSON object of dotted keys")
    overrides = {k: v for k, v in overrides.items() if k != "output.dir"}
    cfg = config_from_mapping(overrides)

    run_id = run_id_for(preset, cfg)
    out_dir = os.path.join(_runs_root(), run_id)
    logger.info(f"HTTP run {run_id} ({len(overrides)} overrides)")
    result = run_experiment(preset, cfg, out_dir)
    body = dict(result.summary, run_id=run_id)
    return jsonify(body), (200 if result.status == "pass" else 422)


@bp.route("/runs/<run_id>", methods=["GET"])
def get_run(run_id):
    summary = read_json(os.path.join(run_dir_for(run_id), "summary.json"))
    if summary is None:
        abort(404)
    return jsonify(dict(summary, run_id=run_id))


# === Alias expected by app.py ===
experiments_bp = bp
