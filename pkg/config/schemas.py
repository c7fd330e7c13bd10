"""JSON schemas for model.json and plan.json."""

from typing import Any, Dict

from jsonschema import Draft202012Validator

_NUMBER_LIST = {'type': 'array', 'items': {'type': 'number'}, 'minItems': 1}

MODEL_SCHEMA: Dict[str, Any] = {
    '$schema': 'https://json-schema.org/draft/2020-12/schema',
    'title': 'Covariate SBM model',
    'type': 'object',
    'required': ['G', 'field'],
    'additionalProperties': False,
    'properties': {
        'G': {'type': 'integer', 'minimum': 1},
        'd': {'type': 'integer', 'minimum': 1},
        'lower': _NUMBER_LIST,
        'upper': _NUMBER_LIST,
        'field': {
            'type': 'object',
            'required': ['name'],
            'additionalProperties': False,
            'properties': {
                'name': {'enum': ['planted-partition', 'logistic-homophily']},
                'params': {'type': 'object'},
            },
        },
        'pi': {
            'type': 'object',
            'additionalProperties': False,
            'properties': {
                'kind': {'enum': ['constant', 'linear']},
                'weights': _NUMBER_LIST,
                'intercept': _NUMBER_LIST,
                'slope': _NUMBER_LIST,
            },
        },
        'covariate_law': {
            'type': 'object',
            'additionalProperties': False,
            'properties': {'name': {'enum': ['uniform']}},
        },
        'rho': {'type': 'number', 'minimum': 0},
        'constants': {
            'type': 'object',
            'additionalProperties': {'type': 'number'},
        },
    },
}

_POINT = {'type': 'array', 'items': {'type': 'number'}, 'minItems': 1}

PLAN_SCHEMA: Dict[str, Any] = {
    '$schema': 'https://json-schema.org/draft/2020-12/schema',
    'title': 'Monte Carlo experiment plan',
    'type': 'object',
    'required': ['model', 'N'],
    'additionalProperties': False,
    'properties': {
        'model': {key: value for key, value in MODEL_SCHEMA.items() if key != '$schema'},
        'pairs': {
            'type': 'array',
            'items': {
                'type': 'object',
                'required': ['x', 'xp'],
                'additionalProperties': False,
                'properties': {'x': _POINT, 'xp': _POINT},
            },
        },
        'pair_grid': {'type': 'integer', 'minimum': 2},
        'N': {'type': 'array', 'items': {'type': 'integer', 'minimum': 1}, 'minItems': 1},
        'k': {
            'type': 'array', 'minItems': 1,
            'items': {'anyOf': [{'type': 'integer', 'minimum': 1}, {'const': 'optimal'}]},
        },
        'tau': {
            'type': 'array', 'minItems': 1,
            'items': {'anyOf': [{'type': 'number', 'minimum': 0}, {'const': 'mean-degree'}]},
        },
        'delta': {
            'type': 'array', 'minItems': 1,
            'items': {'type': 'number', 'exclusiveMinimum': 0, 'exclusiveMaximum': 1},
        },
        'replications': {'type': 'integer', 'minimum': 1},
        'seed': {'type': 'integer', 'minimum': 0},
        'workers': {'type': 'integer', 'minimum': 1},
        'grid_resolution': {'type': 'integer', 'minimum': 2},
        'restarts': {'type': 'integer', 'minimum': 1},
        'mode': {'enum': ['exclude-self', 'literal']},
        'noiseless': {'type': 'boolean'},
        'acceptance': {
            'type': 'array',
            'items': {'enum': ['coverage', 'davis_kahan', 'radius']},
        },
    },
}

SCHEMAS = {'model': MODEL_SCHEMA, 'plan': PLAN_SCHEMA}


def schema_errors(document: Any, kind: str) -> list:
    """Messages for every schema violation, each prefixed with its JSON path."""
    validator = Draft202012Validator(SCHEMAS[kind])
    errors = sorted(validator.iter_errors(document), key=lambda e: e.json_path)
    return [f"{e.json_path}: {e.message}" for e in errors]
