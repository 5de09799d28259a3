#!/usr/bin/env python3
"""
Bit Filling Module
Partição dos caminhos livres entre pacotes novos e FB-FEC (massa de reparo >= Δ)
Projeto: AC-RLNC Multipath Simulator
"""

import itertools
import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

logger = logging.getLogger(__name__)

ORACLE_MAX_PATHS = 20
# Somas de taxas são comparadas com 9 casas para estabilizar empates
ROUND_DIGITS = 9
FEASIBILITY_TOL = 1e-12


class AllocationError(ValueError):
    """Problema de alocação inválido"""


@dataclass(frozen=True)
class AllocationProblem:
    """Taxas dos caminhos livres e massa de DoF Δ exigida"""
    rates: Tuple[float, ...]
    delta: float
    paths: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, 'rates', tuple(float(r) for r in self.rates))
        if self.paths is not None:
            object.__setattr__(self, 'paths', tuple(int(p) for p in self.paths))
            if len(self.paths) != len(self.rates):
                raise AllocationError("paths e rates com tamanhos diferentes")
        if not self.rates:
            raise AllocationError("Lista de taxas vazia")
        if any(r < 0.0 or r > 1.0 for r in self.rates):
            raise AllocationError(f"Taxas fora de [0, 1]: {self.rates}")

    @property
    def labels(self) -> Tuple[int, ...]:
        return self.paths if self.paths is not None else tuple(range(len(self.rates)))


@dataclass(frozen=True)
class Partition:
    """Resultado: caminhos de pacotes novos e caminhos de FB-FEC"""
    new_paths: Tuple[int, ...]
    fbfec_paths: Tuple[int, ...]
    degenerate: bool = False

    def to_dict(self) -> Dict:
        """Converte para dicionário"""
        return {
            'new_paths': list(self.new_paths),
            'fbfec_paths': list(self.fbfec_paths),
            'degenerate': self.degenerate,
        }


def _meets(total: float, delta: float) -> bool:
    return total >= delta - FEASIBILITY_TOL


def _tie_key(rates: Sequence[float], subset: Sequence[int]) -> Tuple[float, float, Tuple[int, ...]]:
    """Menor soma, depois menor taxa máxima, depois ordem lexicográfica dos índices"""
    chosen = sorted(subset)
    total = sum(rates[i] for i in chosen)
    top = max((rates[i] for i in chosen), default=0.0)
    return round(total, ROUND_DIGITS), round(top, ROUND_DIGITS), tuple(chosen)


def _trivial(problem: AllocationProblem) -> Optional[Partition]:
    labels = problem.labels
    if problem.delta <= 0.0:
        return Partition(new_paths=labels, fbfec_paths=())
    if not _meets(sum(problem.rates), problem.delta):
        return Partition(new_paths=(), fbfec_paths=labels, degenerate=True)
    return None


def _to_partition(problem: AllocationProblem, fbfec: Sequence[int]) -> Partition:
    labels = problem.labels
    chosen = set(fbfec)
    return Partition(
        new_paths=tuple(labels[i] for i in range(len(labels)) if i not in chosen),
        fbfec_paths=tuple(labels[i] for i in sorted(chosen)),
    )


def bit_fill(problem: AllocationProblem) -> Partition:
    """
    Escolhe o subconjunto de FB-FEC de menor soma de taxas que cobre Δ

    Busca em profundidade com poda sobre as taxas em ordem crescente; é uma
    função pura, então só precisa ser resolvida de novo quando as estimativas mudam.

    Args:
        problem: Taxas dos caminhos livres e Δ

    Returns:
        Partition com caminhos New e FB-FEC
    """
    trivial = _trivial(problem)
    if trivial is not None:
        return trivial

    rates = problem.rates
    delta = problem.delta
    order = sorted(range(len(rates)), key=lambda i: (rates[i], i))
    suffix = [0.0] * (len(order) + 1)
    for pos in range(len(order) - 1, -1, -1):
        suffix[pos] = suffix[pos + 1] + rates[order[pos]]

    best_key = None
    best_subset: Tuple[int, ...] = ()
    chosen = []

    def explore(pos: int, total: float):
        nonlocal best_key, best_subset
        if best_key is not None and round(total, ROUND_DIGITS) > best_key[0]:
            return
        if _meets(total, delta):
            key = _tie_key(rates, chosen)
            if best_key is None or key < best_key:
                best_key, best_subset = key, tuple(sorted(chosen))
            # Taxas nulas ainda podem empatar a soma
            if pos < len(order) and round(rates[order[pos]], ROUND_DIGITS) > 0.0:
                return
        if pos == len(order) or not _meets(total + suffix[pos], delta):
            return

        index = order[pos]
        chosen.append(index)
        explore(pos + 1, total + rates[index])
        chosen.pop()
        explore(pos + 1, total)

    explore(0, 0.0)
    logger.debug(f"bit_fill Δ={delta:.4f} -> fbfec {best_subset}")
    return _to_partition(problem, best_subset)


def bit_fill_oracle(problem: AllocationProblem) -> Partition:
    """Ótimo exato por enumeração de todos os subconjuntos (até 20 caminhos)"""
    if len(problem.rates) > ORACLE_MAX_PATHS:
        raise AllocationError(
            f"Oráculo limitado a {ORACLE_MAX_PATHS} caminhos, recebido {len(problem.rates)}"
        )

    trivial = _trivial(problem)
    if trivial is not None:
        return trivial

    rates = problem.rates
    best_key = None
    best_subset: Tuple[int, ...] = ()
    for size in range(len(rates) + 1):
        for subset in itertools.combinations(range(len(rates)), size):
            if not _meets(sum(rates[i] for i in subset), problem.delta):
                continue
            key = _tie_key(rates, subset)
            if best_key is None or key < best_key:
                best_key, best_subset = key, subset
    return _to_partition(problem, best_subset)
