# app/routes/cli_routes.py
from flask import Blueprint
from app.controllers.profile_controller import profile1d
from app.controllers.calibration_controller import calibrate, admissible, check_config
from app.controllers.path_controller import path_energy
from app.controllers.flow_controller import relax
from app.controllers.minmax_controller import minmax
from app.controllers.varifold_controller import varifold_mass, sweep_eps
from app.controllers.reproduce_controller import reproduce

# Commands are registered at the top level of the `flask` / `run.py` group
cli_bp = Blueprint('lab', __name__, cli_group=None)

# --------------------------
# Profile Commands
# --------------------------
cli_bp.cli.command('profile1d')(profile1d)

# --------------------------
# Calibration Commands
# --------------------------
cli_bp.cli.command('calibrate')(calibrate)
cli_bp.cli.command('admissible')(admissible)
cli_bp.cli.command('check-config')(check_config)

# --------------------------
# Path and Flow Commands
# --------------------------
cli_bp.cli.command('path-energy')(path_energy)
cli_bp.cli.command('relax')(relax)

# --------------------------
# Minmax Commands
# --------------------------
cli_bp.cli.command('minmax')(minmax)

# --------------------------
# Varifold Commands
# --------------------------
cli_bp.cli.command('varifold-mass')(varifold_mass)
cli_bp.cli.command('sweep-eps')(sweep_eps)

# --------------------------
# Pipeline Commands
# --------------------------
cli_bp.cli.command('reproduce')(reproduce)
