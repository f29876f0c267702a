# app.py
import os
import logging
from datetime import datetime, timezone
from flask import Flask, jsonify
from werkzeug.exceptions import HTTPException

from models.errors import ConfigError

# -----------------------------
# Create app
# -----------------------------
app = Flask(__name__)

# Root for HTTP-triggered runs (one subdirectory per run id)
app.config["SP2D_OUTPUT_DIR"] = os.environ.get("SP2D_OUTPUT_DIR", "runs")
app.config["MAX_CONTENT_LENGTH"] = 1 * 1024 * 1024  # config overrides only
app.json.sort_keys = False  # keep summary keys in run order

# -----------------------------
# Logging
# -----------------------------
logging.basicConfig(
    level=os.environ.get("LOG_LEVEL", "INFO"),
    format="%(levelname)s:%(name)s:%(message)s",
)
logger = logging.getLogger(__name__)

# -----------------------------
# Blueprints
# Imports are resilient: if a module exports `bp`, we alias it to the expected name.
# -----------------------------

# Experiments
try:
    from routes.experiments import experiments_bp
except Exception:
    try:
        from routes.experiments import bp as experiments_bp
    except Exception as e:
        logger.warning(f"experiments blueprint not loaded: {e}")
        experiments_bp = None
if experiments_bp is not None:
    app.register_blueprint(experiments_bp)

# Field dumps / manifests
try:
    from routes.fields import fields_bp
except Exception:
    try:
        from routes.fields import bp as fields_bp
    except Exception as e:
        logger.warning(f"fields blueprint not loaded: {e}")
        fields_bp = None
if fields_bp is not None:
    app.register_blueprint(fields_bp)

# -----------------------------
# CLI (flask --app app sp2d <preset>)
# -----------------------------
try:
    from sp2d import cli as sp2d_cli
except Exception as e:
    logger.warning(f"sp2d command not loaded: {e}")
else:
    app.cli.add_command(sp2d_cli)

# -----------------------------
# Health check
# -----------------------------
@app.route("/health")
def health():
    return jsonify(
        status="ok",
        now=datetime.now(timezone.utc).isoformat(),
        service="sp2d",
    )

# -----------------------------
# Error handlers (JSON)
# -----------------------------
@app.errorhandler(ConfigError)
@app.errorhandler(ValueError)
def bad_request(err):
    logger.warning(f"400: {err}")
    return jsonify(status="error", error=str(err)), 400

@app.errorhandler(404)
def not_found(err):
    return jsonify(status="error", error="not found"), 404

@app.errorhandler(Exception)
def internal_error(err):
    if isinstance(err, HTTPException):
        return jsonify(status="error", error=err.description), err.code
    logger.error(f"500 error: {err}")
    return jsonify(status="error", error="internal server error"), 500

# -----------------------------
# Gunicorn entry point
# -----------------------------
if __name__ == "__main__":
    # Local dev server
    app.run(host="0.0.0.0", port=int(os.environ.get("PORT", 5000)), debug=True)
