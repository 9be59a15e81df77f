"""Ready-to-run worked example specs, one per file name."""

EXAMPLES: dict[str, dict] = {
    "rd-chain-uniform.json": {
        "kind": "rd-chain",
        "F": [0.0, 0.25, 0.5, 0.75, 1.0],
        "G": [0.0, 1.0, 2.0, 3.0, 4.0],
    },
    "rd-chain-two-blocks.json": {
        "kind": "rd-chain",
        "F": [0.0, 0.4, 0.8, 0.9, 1.0],
        "G": [0.0, 1.0, 2.0, 3.0, 4.0],
    },
    "rd-bundle-separable.json": {
        "kind": "rd-bundle",
        "shape": [2, 2],
        "F": {"variant": "separable", "tables": [[0.0, 1.0, 4.0], [0.0, 2.0, 3.0]]},
        "G": {"variant": "natural"},
        "options": {"oracle": True},
    },
    "rd-bundle-half-height.json": {
        "kind": "rd-bundle",
        "shape": [1, 1],
        "F": {"variant": "tabulated", "values": [[0.0, 0.5], [0.5, 1.0]]},
        "options": {"oracle": True},
    },
    "solve-unconstrained.json": {
        "kind": "solve-unconstrained",
        "shape": [2, 2],
        "m": 0.0,
        "M": 1.0,
    },
    "solve-anchored.json": {
        "kind": "solve-anchored",
        "n": 4,
        "anchors": [[2, 0.8], [4, 1.0]],
        "options": {"oracle": True, "seed": 7},
    },
    "solve-linear-geometric.json": {
        "kind": "solve-linear",
        "n": 10,
        "M": 1.0,
        "coefficients": [1, 2, 3, 4, 5, 6, 7, 8, 9, 10],
        "target": 3.0,
    },
    "solve-linear-infeasible.json": {
        "kind": "solve-linear",
        "n": 3,
        "M": 1.0,
        "coefficients": [1, 2, 3],
        "target": 4.0,
    },
    "solve-height.json": {
        "kind": "solve-height",
        "shape": [2, 2],
        "m": 0.0,
        "M": 1.0,
        "coefficients": [1, 2, 3, 4],
        "target": 2.0,
        "options": {"oracle": True, "seed": 3},
    },
    "solve-separable.json": {
        "kind": "solve-separable",
        "factors": [
            {"kind": "unconstrained", "n": 2, "M": 1.0},
            {"kind": "anchored", "n": 3, "anchors": [[1, 0.5], [3, 1.0]]},
        ],
        "overhead": {"a0": 1.0, "b0": 0.5},
    },
    "solve-server-mix.json": {
        "kind": "solve-server-mix",
        "divergences": [0.3, 1.2, -0.5],
        "ranges": [[0.0, 1.0], [0.0, 1.0], [0.0, 1.0]],
        "options": {"oracle": True, "seed": 11},
    },
    "solve-server-mix-costs.json": {
        "kind": "solve-server-mix",
        "cost_tables": [[0.0, 1.0, 3.0], [1.0, 1.5, 2.0, 4.0]],
    },
    "check-properties.json": {
        "kind": "check-properties",
        "shape": [2, 2],
        "F": {"variant": "tabulated", "values": [[0.0, 0.3, 0.5], [0.2, 0.6, 1.1], [0.9, 1.4, 2.0]]},
        "c": [0.5, 1.0, 2.0, 10.0],
    },
}
