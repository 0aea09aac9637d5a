"""Clamped graph smoothing over the heterogeneous network.

Every node gets a d-dimensional vector. Term nodes with a known embedding
are clamped to it; all remaining nodes are free and relax to the weighted
average of their neighbors, which minimizes the edge-weighted sum of
squared differences. Two independent routes find that minimum:

* solve(): in-place Gauss-Seidel sweeps until the largest per-node move
  drops below the tolerance;
* closed_form_solve(): one direct linear solve of the harmonic system,
  kept as a small-problem cross-check.

Free nodes in a component with no clamped node have no information source;
both routes leave them at zero and report a diagnostic.
"""

from __future__ import annotations

import hashlib
import json
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .embeddings import EmbeddingTable
from .errors import ParseError, ValidationError
from .network import HeteroNetwork, TypedNode

logger = logging.getLogger(__name__)

# order in which free nodes are visited within one sweep
_SWEEP_KINDS = ("T", "B", "S", "M", "S", "B")


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 100
    tolerance: float = 1e-6
    track_energy: bool = False


@dataclass(frozen=True)
class ConvergenceReport:
    iterations: int
    converged: bool
    final_displacement: float
    final_energy: float
    energies: tuple[float, ...] = ()
    isolated_components: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "final_displacement": self.final_displacement,
            "final_energy": self.final_energy,
            "isolated_components": list(self.isolated_components),
        }


@dataclass
class RepresentationModel:
    """Vectors for every network node plus the set of clamped term nodes."""

    dim: int
    vectors: dict[TypedNode, np.ndarray]
    clamped: frozenset[TypedNode]
    convergence: ConvergenceReport | None = None
    diagnostics: list[str] = field(default_factory=list)

    def vector(self, node: TypedNode) -> np.ndarray:
        return self.vectors[node]


def initialize_representation(net: HeteroNetwork, table: EmbeddingTable) -> RepresentationModel:
    """Clamp T nodes found in the table to their embedding; zero everything else.

    A T node missing from the table stays free, like B, S, and M nodes.
    """
    vectors: dict[TypedNode, np.ndarray] = {}
    clamped = set()
    for node in net.nodes:
        if node.kind == "T" and node.key in table:
            vectors[node] = np.array(table.vectors[node.key], dtype=np.float64)
            clamped.add(node)
        else:
            vectors[node] = np.zeros(table.dim, dtype=np.float64)
    return RepresentationModel(dim=table.dim, vectors=vectors, clamped=frozenset(clamped))


def _sweep_schedule(net: HeteroNetwork, clamped: frozenset[TypedNode]) -> list[TypedNode]:
    by_kind: dict[str, list[TypedNode]] = {"T": [], "B": [], "S": [], "M": []}
    for node in net.nodes:
        if node not in clamped:
            by_kind[node.kind].append(node)
    for nodes in by_kind.values():
        nodes.sort()
    schedule: list[TypedNode] = []
    for kind in _SWEEP_KINDS:
        schedule.extend(by_kind[kind])
    return schedule


def sweep_update(model: RepresentationModel, net: HeteroNetwork) -> float:
    """Run one Gauss-Seidel sweep in place; return the largest L2 node move.

    Each free node is set to the weighted average of its neighbors, using
    already-updated values within the sweep. Free nodes without neighbors
    are left untouched. Clamped nodes never move.
    """
    vectors = model.vectors
    max_disp = 0.0
    for node in _sweep_schedule(net, model.clamped):
        nbrs = net.neighbors(node)
        if not nbrs:
            continue
        acc = np.zeros(model.dim, dtype=np.float64)
        weight_sum = 0.0
        for other, w in nbrs.items():
            acc += w * vectors[other]
            weight_sum += w
        acc /= weight_sum
        disp = float(np.linalg.norm(acc - vectors[node]))
        vectors[node] = acc
        if disp > max_disp:
            max_disp = disp
    return max_disp


def energy(model: RepresentationModel, net: HeteroNetwork) -> float:
    """Edge-weighted sum of squared vector differences, each edge counted once."""
    total = 0.0
    for a, b, w in net.edges():
        diff = model.vectors[a] - model.vectors[b]
        total += w * float(diff @ diff)
    return total


def _free_components_without_clamp(net, clamped):
    """Yield connected components (node lists) that contain no clamped node."""
    seen: set[TypedNode] = set()
    for start in sorted(net.nodes):
        if start in seen:
            continue
        comp = [start]
        seen.add(start)
        queue = deque([start])
        has_clamp = start in clamped
        while queue:
            node = queue.popleft()
            for nbr in net.neighbors(node):
                if nbr not in seen:
                    seen.add(nbr)
                    comp.append(nbr)
                    queue.append(nbr)
                    has_clamp = has_clamp or nbr in clamped
        if not has_clamp:
            yield comp


def _isolation_diagnostics(net, clamped) -> list[str]:
    diags = []
    for comp in _free_components_without_clamp(net, clamped):
        sample = min(comp)
        diags.append(
            f"component of {len(comp)} free nodes (e.g. {sample.kind}:{sample.key}) "
            f"has no clamped node; vectors stay zero"
        )
    return diags


def solve(
    net: HeteroNetwork,
    table: EmbeddingTable,
    config: SolverConfig | None = None,
    initial: RepresentationModel | None = None,
) -> RepresentationModel:
    """Relax free nodes by repeated sweeps until convergence.

    Stops when the largest per-node move in a sweep falls below
    config.tolerance, or after config.max_iters sweeps. The returned model
    carries a ConvergenceReport; clamped vectors are bit-identical to the
    table. `initial` substitutes a custom starting model (same network),
    used to check that the fixed point does not depend on initialization.
    """
    config = config or SolverConfig()
    if config.max_iters < 1:
        raise ValidationError("max_iters must be >= 1")
    if config.tolerance <= 0.0:
        raise ValidationError("tolerance must be positive")
    model = initial if initial is not None else initialize_representation(net, table)
    isolated = _isolation_diagnostics(net, model.clamped)
    for msg in isolated:
        logger.warning("%s", msg)
    energies: list[float] = []
    displacement = float("inf")
    iterations = 0
    converged = False
    for iterations in range(1, config.max_iters + 1):
        displacement = sweep_update(model, net)
        if config.track_energy:
            energies.append(energy(model, net))
        if displacement < config.tolerance:
            converged = True
            break
    if not converged:
        logger.warning(
            "solver did not converge in %d sweeps (last move %.3g)",
            config.max_iters,
            displacement,
        )
    model.convergence = ConvergenceReport(
        iterations=iterations,
        converged=converged,
        final_displacement=displacement,
        final_energy=energy(model, net),
        energies=tuple(energies),
        isolated_components=tuple(isolated),
    )
    model.diagnostics = list(isolated)
    return model


def closed_form_solve(
    net: HeteroNetwork, table: EmbeddingTable, max_free: int = 2000
) -> RepresentationModel:
    """Solve the harmonic system directly: every free node equals the
    weighted average of its neighbors, with clamped values substituted.

    Assembles the free-node Laplacian block and solves it once per model
    (all d dimensions share the matrix). Guarded to max_free free nodes.
    Free components with no clamped node are left at zero with a diagnostic.
    """
    model = initialize_representation(net, table)
    isolated_nodes: set[TypedNode] = set()
    diags = _isolation_diagnostics(net, model.clamped)
    for comp in _free_components_without_clamp(net, model.clamped):
        isolated_nodes.update(comp)
    free = sorted(
        n for n in net.nodes if n not in model.clamped and n not in isolated_nodes
    )
    if len(free) > max_free:
        raise ValidationError(
            f"closed-form route limited to {max_free} free nodes, got {len(free)}"
        )
    for msg in diags:
        logger.warning("%s", msg)
    model.diagnostics = diags
    if not free:
        return model
    index = {node: i for i, node in enumerate(free)}
    n = len(free)
    a_mat = np.zeros((n, n), dtype=np.float64)
    b_mat = np.zeros((n, model.dim), dtype=np.float64)
    for node, i in index.items():
        degree = 0.0
        for nbr, w in net.neighbors(node).items():
            degree += w
            j = index.get(nbr)
            if j is not None:
                a_mat[i, j] -= w
            else:
                # neighbor is clamped: isolated nodes cannot neighbor a
                # solvable one (different components)
                b_mat[i] += w * model.vectors[nbr]
        a_mat[i, i] = degree
    solution = np.linalg.solve(a_mat, b_mat)
    for node, i in index.items():
        model.vectors[node] = solution[i].copy()
    return model


def clamped_digest(model: RepresentationModel) -> str:
    """Stable hash of the clamped set and its vectors."""
    h = hashlib.sha256()
    for node in sorted(model.clamped):
        vec = model.vectors[node]
        h.update(node.kind.encode())
        h.update(node.key.encode())
        h.update(b"\x00")
        h.update(" ".join(repr(float(x)) for x in vec).encode())
        h.update(b"\n")
    return h.hexdigest()


def dump_model(model: RepresentationModel, path) -> None:
    """Write the model as a text table: header JSON line, then one node per line.

    Floats are written with repr so loading restores them bit-exactly.
    """
    nodes = sorted(model.vectors)
    for node in nodes:
        if "\t" in node.key or "\n" in node.key:
            raise ValidationError(f"node key {node.key!r} cannot be serialized")
    header = {
        "dim": model.dim,
        "nodes": len(nodes),
        "clamped_digest": clamped_digest(model),
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for node in nodes:
            flag = "c" if node in model.clamped else "f"
            values = " ".join(repr(float(x)) for x in model.vectors[node])
            fh.write(f"{node.kind}\t{node.key}\t{flag}\t{values}\n")


def load_model(path) -> RepresentationModel:
    """Read a model written by dump_model, verifying the clamped-set digest."""
    with open(path, encoding="utf-8") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line)
            dim = int(header["dim"])
            declared_nodes = int(header["nodes"])
            declared_digest = header["clamped_digest"]
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{path}: bad model header") from exc
        vectors: dict[TypedNode, np.ndarray] = {}
        clamped = set()
        for lineno, line in enumerate(fh, 2):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 4:
                raise ParseError(f"{path}: line {lineno}: expected 4 tab-separated fields")
            kind, key, flag, raw = parts
            node = TypedNode(kind, key)
            if node in vectors:
                raise ValidationError(f"{path}: line {lineno}: duplicate node {node}")
            try:
                vec = np.array([float(x) for x in raw.split()], dtype=np.float64)
            except ValueError as exc:
                raise ParseError(f"{path}: line {lineno}: bad vector") from exc
            if vec.shape != (dim,):
                raise ParseError(
                    f"{path}: line {lineno}: vector has {vec.shape[0]} components, expected {dim}"
                )
            vectors[node] = vec
            if flag == "c":
                clamped.add(node)
            elif flag != "f":
                raise ParseError(f"{path}: line {lineno}: bad clamp flag {flag!r}")
    if len(vectors) != declared_nodes:
        raise ValidationError(
            f"{path}: header declares {declared_nodes} nodes but file holds {len(vectors)}"
        )
    model = RepresentationModel(dim=dim, vectors=vectors, clamped=frozenset(clamped))
    digest = clamped_digest(model)
    if digest != declared_digest:
        raise ValidationError(f"{path}: clamped-set digest mismatch")
    return model
