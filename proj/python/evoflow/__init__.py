"""Python access to the evoflow workflow engine."""

import json

from . import _core
from ._core import EvoflowError, builtin_tools, check_mutation as _check_mutation, pool_protein, project_residues, score_curation

__all__ = [
    "EvoflowError",
    "builtin_tools",
    "check_mutation",
    "fit_ridge",
    "generate_config",
    "parse_plan",
    "pool_protein",
    "project_residues",
    "run_session",
    "score_curation",
    "score_tournament",
    "top_combinations",
    "validate_config",
]


def score_tournament(wins):
    return json.loads(_core.score_tournament(dict(wins)))


def fit_ridge(rows, lam=1.0):
    return json.loads(_core.fit_ridge(list(rows), lam))


def top_combinations(model, orders, k):
    return {int(o): v for o, v in json.loads(_core.top_combinations(json.dumps(model), set(orders), k)).items()}


def parse_plan(text):
    return json.loads(_core.parse_plan(text))


def check_mutation(token, reference):
    return json.loads(_check_mutation(token, reference))


def generate_config(csv_file, requirements=""):
    return json.loads(_core.generate_config(str(csv_file), requirements))


def validate_config(config):
    return _core.validate_config(json.dumps(config))


def run_session(fixtures, objective, output_dir, seed=0):
    return json.loads(_core.run_session(str(fixtures), objective, str(output_dir), seed))
