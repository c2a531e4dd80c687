import logging
from flask import Flask
from flask.json.provider import DefaultJSONProvider
import numpy as np
from .config import Config

__version__ = "1.0.0"


class LabJSONProvider(DefaultJSONProvider):
    """JSON provider that also understands numpy scalars, arrays and model objects."""
    sort_keys = True
    compact = False

    @staticmethod
    def default(o):
        if isinstance(o, np.generic):
            return o.item()
        if isinstance(o, np.ndarray):
            return o.tolist()
        if hasattr(o, 'to_dict'):
            return o.to_dict()
        return DefaultJSONProvider.default(o)


def create_app(config_object=Config):
    """
    Application factory function.
    Creates and configures the Flask application that hosts the lab commands.
    """
    app = Flask(__name__)

    # Load configuration from the Config class
    app.config.from_object(config_object)
    app.json = LabJSONProvider(app)

    # Service modules log through the standard hierarchy; align it with the app
    level = getattr(logging, app.config.get("LOG_LEVEL", "INFO"), logging.INFO)
    app.logger.setLevel(level)
    logging.getLogger("app").setLevel(level)
    if not logging.getLogger().handlers:
        logging.basicConfig(format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    # Register the command blueprint
    from app.routes.cli_routes import cli_bp
    app.register_blueprint(cli_bp)

    return app
