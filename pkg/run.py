# run.py
from flask.cli import FlaskGroup

from app import create_app

# `python run.py <command>` and `flask --app run <command>` expose the same commands
cli = FlaskGroup(create_app=create_app)

if __name__ == '__main__':
    cli()
