# routes/fields.py
import logging
import os

from flask import Blueprint, abort, jsonify, send_from_directory

from routes.experiments import run_dir_for

bp = Blueprint("fields", __name__, url_prefix="/fields")

logger = logging.getLogger(__name__)

ARTIFACT_SUFFIXES = (".sp2d", ".csv", ".json")


@bp.route("/<run_id>", methods=["GET"])
def list_artifacts(run_id):
    run_dir = run_dir_for(run_id)
    if not os.path.isdir(run_dir):
        abort(404)
    names = sorted(n for n in os.listdir(run_dir) if n.endswith(ARTIFACT_SUFFIXES))
    return jsonify(run_id=run_id, artifacts=names)


@bp.route("/<run_id>/<name>", methods=["GET"])
def download_artifact(run_id, name):
    run_dir = run_dir_for(run_id)
    if not name.endswith(ARTIFACT_SUFFIXES):
        abort(404)
    # send_from_directory rejects names escaping run_dir
    return send_from_directory(run_dir, name, as_attachment=name.endswith(".sp2d"))


# === Alias expected by app.py ===
fields_bp = bp
