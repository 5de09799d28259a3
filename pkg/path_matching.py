#!/usr/bin/env python3
"""
Path Matching Module
Construção de caminhos globais em redes multipath multi-hop: casamento natural,
oráculo por força bruta, objetivos de balanceamento e casamento descentralizado
Projeto: AC-RLNC Multipath Simulator
"""

import itertools
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from acrlnc_protocol import RateEstimator
from network_simulator import Topology

logger = logging.getLogger(__name__)

BRUTE_FORCE_MAX_PATHS = 6
BRUTE_FORCE_MAX_HOPS = 4
ROUND_DIGITS = 9


class MatchingError(ValueError):
    """Casamento inadmissível ou entrada inválida"""


def _as_rates(rates) -> np.ndarray:
    """Valida a matriz H×P de taxas"""
    try:
        array = np.array(rates, dtype=float)
    except ValueError as e:
        raise MatchingError(f"Matriz de taxas irregular: {str(e)}") from e
    if array.ndim != 2 or array.size == 0:
        raise MatchingError(f"Taxas devem formar uma matriz H×P, recebido formato {array.shape}")
    if np.any(array < 0.0) or np.any(array > 1.0):
        raise MatchingError("Taxas fora de [0, 1]")
    return array


def _rate_order(hop_rates: np.ndarray) -> np.ndarray:
    """Ordem decrescente de taxa, empates pelo índice"""
    return np.argsort(-hop_rates, kind="stable")


@dataclass
class Matching:
    """
    Casamento local L (P×(H−1)) e global G (P×H), índices a partir de 0.

    L[p, h] é o enlace do salto h+1 casado com o enlace p do salto h;
    G[p, h] é o enlace do salto h pertencente ao caminho global p.
    """
    L: np.ndarray
    G: np.ndarray

    def __post_init__(self):
        self.L = np.asarray(self.L, dtype=int)
        self.G = np.asarray(self.G, dtype=int)
        self.validate()

    @property
    def P(self) -> int:
        return int(self.G.shape[0])

    @property
    def H(self) -> int:
        return int(self.G.shape[1])

    def validate(self):
        """Admissibilidade: colunas são permutações e G é consistente com L"""
        P, H = self.G.shape
        if self.L.shape != (P, H - 1):
            raise MatchingError(f"L com formato {self.L.shape}, esperado {(P, H - 1)}")
        identity = np.arange(P)
        for column in list(self.L.T) + list(self.G.T):
            if not np.array_equal(np.sort(column), identity):
                raise MatchingError(f"Coluna não é permutação: {column.tolist()}")
        if not np.array_equal(self.G[:, 0], identity):
            raise MatchingError("G deve começar pela identidade")
        for h in range(H - 1):
            if not np.array_equal(self.G[:, h + 1], self.L[self.G[:, h], h]):
                raise MatchingError(f"G e L inconsistentes no salto {h + 1}")

    @classmethod
    def from_global(cls, G: np.ndarray) -> 'Matching':
        """Reconstrói L a partir das colunas de G"""
        G = np.asarray(G, dtype=int)
        P, H = G.shape
        L = np.zeros((P, H - 1), dtype=int)
        for h in range(H - 1):
            L[G[:, h], h] = G[:, h + 1]
        return cls(L, G)

    @classmethod
    def identity(cls, P: int, H: int) -> 'Matching':
        """Caminhos globais ingênuos: enlace p em todos os saltos"""
        return cls(np.tile(np.arange(P)[:, None], (1, H - 1)), np.tile(np.arange(P)[:, None], (1, H)))

    def to_printed(self) -> Tuple[np.ndarray, np.ndarray]:
        """
        Layout impresso P×H a partir de 1: L recebe a coluna identidade do emissor

        Returns:
            (L_impresso, G_impresso)
        """
        first = np.arange(self.P)[:, None]
        return np.hstack([first, self.L]) + 1, self.G + 1

    def to_dict(self) -> Dict:
        """Converte para dicionário (layout impresso)"""
        L, G = self.to_printed()
        return {'L': L.tolist(), 'G': G.tolist()}


@dataclass
class GlobalPathRates:
    """Taxas dos caminhos globais e a vazão máxima associada"""
    r_G: np.ndarray
    eta_max: float

    def to_dict(self) -> Dict:
        return {'r_G': self.r_G.tolist(), 'eta_max': self.eta_max}


@dataclass
class BalancingObjectives:
    sum_min: float
    sum_absdiff: float


def _validate_first_hop_order(order: Sequence[int], hop_rates: np.ndarray) -> np.ndarray:
    order = np.asarray(order, dtype=int)
    P = len(hop_rates)
    if not np.array_equal(np.sort(order), np.arange(P)):
        raise MatchingError(f"Ordem do primeiro salto não é permutação: {order.tolist()}")
    if np.any(np.diff(hop_rates[order]) > 0):
        raise MatchingError(f"Ordem do primeiro salto não é decrescente em taxa: {order.tolist()}")
    return order


def first_hop_sequence(hop_rates: Sequence[float], first_hop_order: Optional[Sequence[int]] = None) -> np.ndarray:
    """Ordem dos enlaces de saída do emissor repassada ao primeiro nó intermediário"""
    hop_rates = np.asarray(hop_rates, dtype=float)
    if first_hop_order is not None:
        return _validate_first_hop_order(first_hop_order, hop_rates)
    return _rate_order(hop_rates)


def natural_match(rates, first_hop_order: Optional[Sequence[int]] = None) -> Matching:
    """
    Casamento natural: em cada salto os enlaces são ordenados por taxa
    decrescente e casados posição a posição com a ordem do salto anterior

    Args:
        rates: Matriz H×P de taxas (linhas = saltos)
        first_hop_order: Ordem dos enlaces do primeiro salto usada pelo emissor
            (deve ser decrescente em taxa; só muda algo entre taxas iguais)

    Returns:
        Matching admissível
    """
    rates = _as_rates(rates)
    H, P = rates.shape
    order = first_hop_sequence(rates[0], first_hop_order)

    L = np.zeros((P, H - 1), dtype=int)
    for h in range(1, H):
        next_order = _rate_order(rates[h])
        L[order, h - 1] = next_order
        order = next_order

    G = np.zeros((P, H), dtype=int)
    G[:, 0] = np.arange(P)
    for h in range(1, H):
        G[:, h] = L[G[:, h - 1], h - 1]
    return Matching(L, G)


def global_path_rates(matching: Matching, rates, forwarding: bool = False) -> GlobalPathRates:
    """
    Taxa de cada caminho global: mínimo dos enlaces (produto em modo de encaminhamento)
    """
    rates = _as_rates(rates)
    member = rates[np.arange(matching.H)[None, :], matching.G]
    r_G = member.prod(axis=1) if forwarding else member.min(axis=1)
    return GlobalPathRates(r_G=r_G, eta_max=float(r_G.sum()))


def eta_max(matching: Matching, rates) -> float:
    """Soma sobre os caminhos globais da menor taxa de seus enlaces"""
    return global_path_rates(matching, rates).eta_max


def min_cut_capacity(rates) -> float:
    """Capacidade de corte mínimo: menor soma de taxas entre os saltos"""
    rates = _as_rates(rates)
    return float(rates.sum(axis=1).min())


def brute_force_match(rates) -> Matching:
    """
    Oráculo exaustivo: maximiza eta_max sobre todas as permutações por salto

    Programação dinâmica salto a salto; estados com o mesmo multiconjunto de
    mínimos parciais são equivalentes para os saltos seguintes.
    """
    rates = _as_rates(rates)
    H, P = rates.shape
    if P > BRUTE_FORCE_MAX_PATHS or H > BRUTE_FORCE_MAX_HOPS:
        raise MatchingError(
            f"Oráculo limitado a P <= {BRUTE_FORCE_MAX_PATHS} e H <= {BRUTE_FORCE_MAX_HOPS}, "
            f"recebido P={P}, H={H}"
        )

    perms = np.array(list(itertools.permutations(range(P))), dtype=int)
    # estado: (mínimos parciais por caminho global, colunas de G)
    states: List[Tuple[np.ndarray, List[np.ndarray]]] = [(rates[0].copy(), [np.arange(P)])]

    for h in range(1, H):
        candidates: Dict[Tuple[float, ...], Tuple[np.ndarray, List[np.ndarray]]] = {}
        for mins, columns in states:
            extended = np.minimum(mins[None, :], rates[h][perms])
            keys = np.round(np.sort(extended, axis=1), ROUND_DIGITS)
            _, first = np.unique(keys, axis=0, return_index=True)
            for i in first:
                key = tuple(keys[i])
                if key not in candidates:
                    candidates[key] = (extended[i], columns + [perms[i]])
        states = list(candidates.values())

    best_mins, best_columns = max(states, key=lambda state: float(state[0].sum()))
    logger.debug(f"Oráculo: eta_max = {best_mins.sum():.4f} sobre {len(states)} estados")
    return Matching.from_global(np.stack(best_columns, axis=1))


def balancing_objectives(rates_in: Sequence[float], rates_out: Sequence[float],
                         l: Sequence[int]) -> BalancingObjectives:
    """
    Objetivos de balanceamento de um casamento local l (entrada p -> saída l[p])

    Returns:
        BalancingObjectives com Σ min e Σ |diferença|
    """
    rates_in = np.asarray(rates_in, dtype=float)
    rates_out = np.asarray(rates_out, dtype=float)
    l = np.asarray(l, dtype=int)
    if len(rates_in) != len(rates_out) or len(l) != len(rates_in):
        raise MatchingError("Vetores de entrada, saída e permutação com tamanhos diferentes")
    matched = rates_out[l]
    return BalancingObjectives(
        sum_min=float(np.minimum(rates_in, matched).sum()),
        sum_absdiff=float(np.abs(rates_in - matched).sum()),
    )


def balancing_optima(rates_in: Sequence[float],
                     rates_out: Sequence[float]) -> Tuple[Set[Tuple[int, ...]], Set[Tuple[int, ...]]]:
    """
    Enumera todas as permutações e devolve (argmax Σ min, argmin Σ |diferença|)
    """
    rates_in = np.asarray(rates_in, dtype=float)
    rates_out = np.asarray(rates_out, dtype=float)
    perms = np.array(list(itertools.permutations(range(len(rates_in)))), dtype=int)
    matched = rates_out[perms]
    sum_min = np.round(np.minimum(rates_in[None, :], matched).sum(axis=1), ROUND_DIGITS)
    sum_absdiff = np.round(np.abs(rates_in[None, :] - matched).sum(axis=1), ROUND_DIGITS)
    argmax = {tuple(p) for p in perms[sum_min == sum_min.max()].tolist()}
    argmin = {tuple(p) for p in perms[sum_absdiff == sum_absdiff.min()].tolist()}
    return argmax, argmin


class LinkRateTracker:
    """
    Estimativa de ε dos enlaces de saída de um nó a partir do feedback local

    Args:
        min_samples: Observações por enlace antes de reportar mudança de ordem
    """

    def __init__(self, paths: int, prior: float = 0.5, horizon: Optional[int] = None,
                 min_samples: int = 0):
        self.estimator = RateEstimator(paths, prior, horizon)
        self.min_samples = min_samples
        self._last_order = _rate_order(self.estimator.rates())

    def observe(self, link: int, ack: bool, slot: int = 0):
        self.estimator.observe(link, ack, slot)

    def rates(self) -> np.ndarray:
        return self.estimator.rates()

    @property
    def warmed_up(self) -> bool:
        return bool(np.all(self.estimator.totals >= self.min_samples))

    def reordered(self) -> bool:
        """True quando a ordem por taxa mudou desde a última consulta"""
        if not self.warmed_up:
            return False
        order = _rate_order(self.rates())
        changed = not np.array_equal(order, self._last_order)
        self._last_order = order
        return changed


class NodeMatcher:
    """
    Casamento local em um nó intermediário: ordena os enlaces de saída e casa
    posição a posição com a ordem recebida do nó anterior.
    """

    def __init__(self, hop: int, rates: Sequence[float]):
        self.hop = hop
        self.rates = np.asarray(rates, dtype=float)
        self.order = _rate_order(self.rates)
        self.local: Optional[np.ndarray] = None
        self.upstream_order: Optional[np.ndarray] = None

    def match(self, upstream_order: Sequence[int]) -> np.ndarray:
        """
        Args:
            upstream_order: Ordem dos enlaces de entrada enviada pelo nó anterior

        Returns:
            Vetor local: enlace de entrada -> enlace de saída
        """
        upstream_order = np.asarray(upstream_order, dtype=int)
        if len(upstream_order) != len(self.rates):
            raise MatchingError(f"Nó {self.hop}: ordem recebida com {len(upstream_order)} enlaces")
        self.upstream_order = upstream_order
        self.local = np.zeros(len(self.rates), dtype=int)
        self.local[upstream_order] = self.order
        return self.local

    def update_rates(self, rates: Sequence[float]) -> bool:
        """Atualiza as taxas; recalcula o casamento só se a ordem mudou"""
        self.rates = np.asarray(rates, dtype=float)
        order = _rate_order(self.rates)
        if np.array_equal(order, self.order):
            return False
        self.order = order
        if self.upstream_order is not None:
            self.match(self.upstream_order)
        logger.debug(f"Nó {self.hop}: nova ordem de saída {order.tolist()}")
        return True


def decentralized_match(rates, first_hop_order: Optional[Sequence[int]] = None) -> Matching:
    """Casamento calculado nó a nó, repassando a ordem de saída adiante"""
    rates = _as_rates(rates)
    H, P = rates.shape
    order = first_hop_sequence(rates[0], first_hop_order)

    columns = []
    for h in range(1, H):
        node = NodeMatcher(h, rates[h])
        columns.append(node.match(order))
        order = node.order

    L = np.stack(columns, axis=1) if columns else np.zeros((P, 0), dtype=int)
    G = np.zeros((P, H), dtype=int)
    G[:, 0] = np.arange(P)
    for h in range(1, H):
        G[:, h] = L[G[:, h - 1], h - 1]
    return Matching(L, G)


def route_topology(topology: Topology, matching: Matching) -> Topology:
    """
    Reindexa a topologia pelos caminhos globais: o enlace p do salto h passa a
    ser o enlace G[p, h]
    """
    if matching.H != topology.H or matching.P != topology.P:
        raise MatchingError(f"Casamento {matching.P}×{matching.H} para topologia {topology.P}×{topology.H}")
    eps = topology.eps[np.arange(topology.H)[None, :], matching.G].T
    return Topology(eps, topology.rtt_slots, topology.feedback_mode)
