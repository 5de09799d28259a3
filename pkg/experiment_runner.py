#!/usr/bin/env python3
"""
Experiment Runner Module
Execução de experimentos: configuração, montagem das sessões, varreduras
paralelas com cache e persistência dos resultados em CSV/JSONL
Projeto: AC-RLNC Multipath Simulator
"""

import os
import json
import math
import hashlib
import logging
import threading
import time
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from acrlnc_protocol import AcrlncReceiver, MpAcrlncSender, SenderConfig
from baseline_protocols import (ParallelSpAcrlnc, SrArqConfig, SrArqReceiver, SrArqRelay,
                                SrArqSender, best_single_global_path, sp_sender_options)
from bounds_analyzer import BoundInputs, f_sweep, mh_bounds, mp_bounds, rtt_sweep
from logging_config import log_progress
from metrics_collector import RunMetrics, aggregate, measure
from network_simulator import FeedbackMode, NetworkSimulator, SlotLoop, Topology, TopologyError
from path_matching import decentralized_match, first_hop_sequence, route_topology
from relay_recoder import RecodeMode, RelayNode

logger = logging.getLogger(__name__)

PROTOCOLS = ('mp_acrlnc', 'sp_acrlnc_per_path', 'sr_arq', 'sr_arq_hop_by_hop', 'mh_acrlnc')
SWEEP_NAMES = ('e1', 'e2')
METRIC_COLUMNS = ('throughput', 'mean_delay', 'max_delay')
CSV_COLUMNS = [
    'config_hash', 'cell', 'protocol', 'iteration', 'seed',
    'e1', 'e2', 'rtt', 'P', 'H',
    'throughput', 'mean_delay', 'max_delay', 'slots', 'delivered', 'lambda_no_feedback',
    'fec_sent', 'fbfec_sent', 'size_limit_sent', 'new_sent', 'retransmission_sent',
    'throughput_std', 'mean_delay_std', 'max_delay_std', 'error',
]


class ConfigError(ValueError):
    """Configuração de experimento inválida"""

    def __init__(self, errors):
        self.errors = [errors] if isinstance(errors, str) else list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class ExperimentConfig:
    """Configuração de um experimento (arquivo JSON em config/)"""
    name: str = "experiment"
    eps: Optional[List[List[Any]]] = None
    eps_by_path: Optional[List[List[Any]]] = None
    rtt: int = 20
    feedback_mode: str = "end_to_end"
    protocol: str = "mp_acrlnc"
    recode_mode: Optional[str] = None
    th: float = 0.0
    o_bar: Optional[int] = None
    window_factor: Optional[float] = None
    iterations: int = 1
    base_seed: int = 0
    packet_count: int = 5000
    max_slots_factor: int = 100
    symbolic: bool = True
    payload_size: int = 16
    sr_window: Any = "rtt"
    rate_estimator: str = "full"
    rate_prior: float = 0.5
    fec_enabled: bool = True
    fbfec_enabled: bool = True
    best_single_path: bool = False
    first_hop_order: Optional[List[int]] = None
    sweep: List[Dict] = field(default_factory=list)
    bounds: Dict = field(default_factory=dict)
    max_workers: int = 4
    cache_enabled: bool = False
    cache_dir: str = "temp/cache"
    export_graphs: bool = False

    @classmethod
    def from_dict(cls, data: Dict) -> 'ExperimentConfig':
        """Cria a configuração; chaves desconhecidas são rejeitadas"""
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known - {'description'})
        if unknown:
            raise ConfigError(f"Chaves desconhecidas na configuração: {unknown}")
        return cls(**{k: v for k, v in data.items() if k in known})

    @classmethod
    def load(cls, path: str) -> 'ExperimentConfig':
        """Carrega um arquivo JSON de experimento"""
        try:
            with open(path, 'r', encoding='utf-8') as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"Falha ao carregar {path}: {str(e)}") from e
        return cls.from_dict(data)

    def to_dict(self) -> Dict:
        """Converte para dicionário"""
        return asdict(self)

    @property
    def config_hash(self) -> str:
        """md5 do JSON canônico da configuração"""
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(',', ':'))
        return hashlib.md5(canonical.encode()).hexdigest()

    def cells(self) -> List[Dict[str, float]]:
        """Células da varredura (uma célula vazia sem varredura)"""
        cells = [dict(cell) for sweep in self.sweep for cell in sweep.get('cells', [])]
        return cells or [{}]

    def raw_eps(self) -> List[List[Any]]:
        """Matriz H×P com nomes simbólicos ainda não substituídos"""
        if self.eps is not None:
            return [list(row) for row in self.eps]
        if self.eps_by_path is not None:
            return [list(column) for column in zip(*self.eps_by_path)]
        raise ConfigError("Topologia sem eps nem eps_by_path")

    def resolve_eps(self, cell: Dict[str, float]) -> np.ndarray:
        """Substitui e1, e2 pelos valores da célula"""
        resolved = []
        for row in self.raw_eps():
            values = []
            for entry in row:
                if isinstance(entry, str):
                    if entry not in cell:
                        raise ConfigError(f"Valor de '{entry}' ausente na célula {cell}")
                    entry = cell[entry]
                values.append(float(entry))
            resolved.append(values)
        return np.array(resolved, dtype=float)

    @property
    def effective_feedback_mode(self) -> FeedbackMode:
        if self.protocol == 'sr_arq_hop_by_hop':
            return FeedbackMode.HOP_BY_HOP
        return FeedbackMode(self.feedback_mode)

    def topology(self, cell: Dict[str, float]) -> Topology:
        return Topology(self.resolve_eps(cell), self.rtt, self.effective_feedback_mode)

    @property
    def effective_recode_mode(self) -> RecodeMode:
        if self.recode_mode is not None:
            return RecodeMode(self.recode_mode)
        if self.protocol in ('sr_arq', 'sr_arq_hop_by_hop'):
            return RecodeMode.FORWARD_ONLY
        if self.protocol == 'sp_acrlnc_per_path':
            return RecodeMode.PER_PATH
        return RecodeMode.SELECTIVE_MIX

    def sender_config(self, paths: int) -> SenderConfig:
        o_bar = self.o_bar
        if o_bar is None and self.window_factor is not None:
            o_bar = int(round(self.window_factor * paths * (self.rtt - 1)))
        return SenderConfig(paths=paths, rtt=self.rtt, th=self.th, o_bar=o_bar,
                            rate_prior=self.rate_prior, rate_estimator=self.rate_estimator,
                            fec_enabled=self.fec_enabled, fbfec_enabled=self.fbfec_enabled)

    def sr_arq_config(self, rtt: int) -> SrArqConfig:
        if self.sr_window == "rtt":
            return SrArqConfig.default(rtt)
        return SrArqConfig(rtt=rtt, window_size=self.sr_window)

    def validate(self) -> List[str]:
        """Lista as invariantes violadas (vazia se a configuração é válida)"""
        errors = []
        if self.protocol not in PROTOCOLS:
            errors.append(f"protocol deve ser um de {PROTOCOLS}, recebido '{self.protocol}'")
        if self.feedback_mode not in [m.value for m in FeedbackMode]:
            errors.append(f"feedback_mode inválido: '{self.feedback_mode}'")
        elif self.protocol == 'mh_acrlnc' and self.feedback_mode != FeedbackMode.END_TO_END.value:
            errors.append("mh_acrlnc exige feedback fim-a-fim")
        if self.recode_mode is not None and self.recode_mode not in [m.value for m in RecodeMode]:
            errors.append(f"recode_mode inválido: '{self.recode_mode}'")
        if self.iterations < 1:
            errors.append(f"iterations deve ser >= 1, recebido {self.iterations}")
        if self.packet_count < 1:
            errors.append(f"packet_count deve ser >= 1, recebido {self.packet_count}")
        if self.window_factor is not None and self.window_factor < 1:
            errors.append(f"window_factor deve ser >= 1, recebido {self.window_factor}")
        if self.o_bar is not None and self.o_bar < 1:
            errors.append(f"o_bar deve ser >= 1, recebido {self.o_bar}")
        if self.sr_window not in ("rtt", None) and not (isinstance(self.sr_window, int) and self.sr_window >= 1):
            errors.append(f"sr_window deve ser 'rtt', null ou inteiro >= 1, recebido {self.sr_window}")

        try:
            raw = self.raw_eps()
            widths = {len(row) for row in raw}
            if len(widths) != 1:
                errors.append("Matriz eps irregular: todos os saltos devem ter o mesmo número de caminhos")
            else:
                for cell in self.cells():
                    try:
                        self.topology(cell)
                    except (TopologyError, ValueError) as e:
                        errors.append(f"Célula {cell}: {str(e)}")
                        break
        except ConfigError as e:
            errors.extend(e.errors)
        return errors

    def validate_or_raise(self):
        errors = self.validate()
        if errors:
            raise ConfigError(errors)


@dataclass
class Session:
    """Sessão montada: laço de slots e o receptor para verificação de payload"""
    loop: SlotLoop
    topology: Topology
    raw: Optional[Dict[int, np.ndarray]] = None
    receiver: Optional[AcrlncReceiver] = None


def build_session(config: ExperimentConfig, cell: Dict[str, float], seed_sequence: np.random.SeedSequence) -> Session:
    """
    Monta emissor, nós intermediários, receptor e rede para uma iteração

    Em multi-hop, os caminhos globais são obtidos pelo casamento natural das
    taxas configuradas e a topologia é reindexada por eles. Cada nó intermediário
    parte desse casamento e o refaz a partir das suas próprias estimativas.
    """
    topology = config.topology(cell)
    first_hop_order = config.first_hop_order
    if config.best_single_path:
        topology = best_single_global_path(topology)
        first_hop_order = None
    if topology.H > 1:
        matching = decentralized_match(topology.rates, first_hop_order)
        topology = route_topology(topology, matching)

    net_seed, coding_seed, relay_seed, payload_seed = seed_sequence.spawn(4)
    net_rng = np.random.default_rng(net_seed)
    P, H = topology.P, topology.H
    packet_count = config.packet_count
    relays: Dict[int, Any] = {}
    raw = None
    receiver = None

    if config.protocol in ('mp_acrlnc', 'mh_acrlnc'):
        if not config.symbolic:
            payload_rng = np.random.default_rng(payload_seed)
            raw = {i: payload_rng.integers(0, 256, config.payload_size, dtype=np.uint8)
                   for i in range(1, packet_count + 1)}
        source = MpAcrlncSender(config.sender_config(P), packet_count,
                                np.random.default_rng(coding_seed), raw=raw)
        sink = receiver = AcrlncReceiver(P, keep_payload=not config.symbolic)
    elif config.protocol == 'sp_acrlnc_per_path':
        rngs = [np.random.default_rng(s) for s in coding_seed.spawn(P)]
        source = ParallelSpAcrlnc(P, config.rtt, packet_count, rngs,
                                  sp_sender_options(config.sender_config(1)))
        sink = source.sink
    elif config.protocol == 'sr_arq':
        source = SrArqSender(P, config.sr_arq_config(config.rtt), packet_count)
        sink = SrArqReceiver(P)
    else:
        hop_config = config.sr_arq_config(topology.per_hop_rtt)
        source = SrArqSender(P, hop_config, packet_count)
        sink = SrArqReceiver(P)
        relays = {h: SrArqRelay(h, P, hop_config) for h in range(1, H)}

    if not relays and H > 1:
        mode = config.effective_recode_mode
        relay_rngs = relay_seed.spawn(H - 1)
        sender_config = config.sender_config(P)
        relay_horizon = sender_config.estimator_horizon if config.rate_estimator == "windowed" else None
        sender_order = first_hop_sequence(topology.rates[0], first_hop_order)
        upstream = lambda: sender_order
        for h in range(1, H):
            relays[h] = RelayNode(h, P, mode, np.random.default_rng(relay_rngs[h - 1]),
                                  rates=topology.rates[h], upstream_order=upstream,
                                  prior=config.rate_prior, horizon=relay_horizon)
            upstream = lambda node=relays[h]: node.order

    network = NetworkSimulator(topology, net_rng)
    max_slots = config.max_slots_factor * (packet_count + config.rtt)
    loop = SlotLoop(network, source, sink, packet_count, relays=relays, max_slots=max_slots)
    return Session(loop=loop, topology=topology, raw=raw, receiver=receiver)


def _cell_labels(cell: Dict[str, float]) -> Dict[str, float]:
    return {name: cell.get(name, math.nan) for name in SWEEP_NAMES}


def run_iteration(config: ExperimentConfig, cell_index: int, cell: Dict[str, float],
                  iteration: int) -> Dict:
    """
    Executa uma iteração e devolve a linha de resultado

    Falhas viram uma linha com a coluna error preenchida.
    """
    seed = config.base_seed + iteration
    row = {
        'config_hash': config.config_hash,
        'cell': cell_index,
        'protocol': config.protocol,
        'iteration': iteration,
        'seed': seed,
        **_cell_labels(cell),
        'rtt': config.rtt,
        'error': "",
    }
    try:
        session = build_session(config, cell, np.random.SeedSequence([seed, cell_index]))
        row['P'] = session.topology.P
        row['H'] = session.topology.H
        trace = session.loop.run()
        metrics = measure(trace)
        if session.raw is not None:
            decoded = session.receiver.decoder.decoded_payloads
            corrupted = [i for i, payload in session.raw.items() if not np.array_equal(decoded.get(i), payload)]
            if corrupted:
                raise RuntimeError(f"{len(corrupted)} payloads decodificados incorretamente")
        row.update({k: v for k, v in metrics.to_dict().items() if k != 'per_path_delivered'})
        row['_metrics'] = metrics
    except Exception as e:
        logger.error(f"Erro na célula {cell_index}, iteração {iteration}: {str(e)}")
        row['error'] = f"{type(e).__name__}: {str(e)}"
    return row


@dataclass
class ExperimentResult:
    """Resultados de uma execução: tabela, resumo por célula e arquivos gerados"""
    rows: pd.DataFrame
    summary: List[Dict]
    files: Dict[str, str] = field(default_factory=dict)

    def aggregate_rows(self) -> pd.DataFrame:
        return self.rows[self.rows['iteration'].astype(str) == 'aggregate']


class ExperimentPipeline:
    """Pipeline de experimentos com processamento paralelo e cache por célula"""

    def __init__(self, experiment: ExperimentConfig, config: Dict = None):
        self.experiment = experiment
        self.config = config or {
            'cache_enabled': experiment.cache_enabled,
            'cache_dir': experiment.cache_dir,
            'max_workers': int(os.getenv('ACRLNC_MAX_WORKERS', experiment.max_workers)),
            'output_dir': os.getenv('ACRLNC_OUTPUT_DIR', 'results'),
            'export_graphs': experiment.export_graphs,
            'progress_callback': None,
            'use_processes': True,
        }

        self.cache_enabled = self.config.get('cache_enabled', False)
        self.cache_dir = self.config.get('cache_dir', 'temp/cache')
        self.output_dir = self.config.get('output_dir', 'results')
        self._progress_lock = threading.Lock()
        self._current_progress: Dict[str, Dict] = {}

        if self.cache_enabled:
            os.makedirs(self.cache_dir, exist_ok=True)

        logger.info(f"Pipeline de experimentos inicializado: {experiment.name} ({experiment.protocol})")

    def _generate_cache_key(self, cell_index: int, cell: Dict) -> str:
        """Chave de cache: hash da configuração mais a célula"""
        content = f"{self.experiment.config_hash}_{cell_index}_{json.dumps(cell, sort_keys=True)}"
        return hashlib.md5(content.encode()).hexdigest()

    def _save_to_cache(self, cache_key: str, data: List[Dict]):
        if not self.cache_enabled:
            return
        try:
            cache_file = os.path.join(self.cache_dir, f"{cache_key}.json")
            cache_data = {'timestamp': datetime.now().isoformat(), 'data': data}
            with open(cache_file, 'w', encoding='utf-8') as f:
                json.dump(cache_data, f, indent=2, ensure_ascii=False,
                          default=lambda o: o.item() if isinstance(o, np.generic) else str(o))
            logger.debug(f"Dados salvos no cache: {cache_key}")
        except Exception as e:
            logger.warning(f"Erro ao salvar cache {cache_key}: {str(e)}")

    def _load_from_cache(self, cache_key: str) -> Optional[List[Dict]]:
        if not self.cache_enabled:
            return None
        try:
            cache_file = os.path.join(self.cache_dir, f"{cache_key}.json")
            if not os.path.exists(cache_file):
                return None
            with open(cache_file, 'r', encoding='utf-8') as f:
                cache_data = json.load(f)
            logger.debug(f"Dados carregados do cache: {cache_key}")
            return cache_data.get('data')
        except Exception as e:
            logger.warning(f"Erro ao carregar cache {cache_key}: {str(e)}")
            return None

    def _update_progress(self, stage: str, progress: float, status: str = ""):
        with self._progress_lock:
            self._current_progress[stage] = {
                'progress': progress,
                'status': status,
                'timestamp': datetime.now().isoformat(),
            }
        callback = self.config.get('progress_callback')
        if callback:
            try:
                callback(stage, progress, status)
            except Exception as e:
                logger.warning(f"Erro no callback de progresso: {str(e)}")

    def get_current_progress(self) -> Dict:
        with self._progress_lock:
            return self._current_progress.copy()

    def _make_executor(self, workers: int):
        if self.config.get('use_processes', True) and workers > 1:
            try:
                return ProcessPoolExecutor(max_workers=workers)
            except (OSError, NotImplementedError, PermissionError) as e:
                logger.warning(f"Processos indisponíveis ({str(e)}), usando threads")
        return ThreadPoolExecutor(max_workers=max(1, workers))

    def _run_tasks(self, tasks: List[Tuple[int, Dict, int]]) -> List[Dict]:
        """Executa as iterações em paralelo; a ordem final é (célula, iteração)"""
        rows: List[Dict] = []
        if not tasks:
            return rows
        workers = max(1, min(int(self.config.get('max_workers', 1)), len(tasks)))
        with self._make_executor(workers) as executor:
            futures = {executor.submit(run_iteration, self.experiment, cell_index, cell, iteration):
                       (cell_index, iteration) for cell_index, cell, iteration in tasks}
            for done, future in enumerate(as_completed(futures), start=1):
                rows.append(future.result())
                self._update_progress('simulate', 100.0 * done / len(tasks), f"{done}/{len(tasks)} iterações")
                if done == len(tasks) or done % max(1, len(tasks) // 10) == 0:
                    log_progress(done, len(tasks), "iteração")
        return rows

    def _aggregate_row(self, cell_index: int, cell: Dict, rows: List[Dict]) -> Tuple[Dict, Dict]:
        experiment = self.experiment
        base = {
            'config_hash': experiment.config_hash,
            'cell': cell_index,
            'protocol': experiment.protocol,
            'iteration': 'aggregate',
            'seed': experiment.base_seed,
            **_cell_labels(cell),
            'rtt': experiment.rtt,
            'P': rows[0].get('P') if rows else None,
            'H': rows[0].get('H') if rows else None,
        }
        runs: List[RunMetrics] = [row['_metrics'] for row in rows if '_metrics' in row]
        failed = [row for row in rows if row.get('error')]
        if not runs:
            base['error'] = f"{len(failed)} iterações falharam"
            return base, {**base, 'count': 0}

        summary = aggregate(runs)
        mean = summary.mean
        std = summary.std
        base.update({
            'throughput': mean['normalized_throughput'],
            'mean_delay': mean['mean_delay'],
            'max_delay': mean['max_delay'],
            'lambda_no_feedback': mean['lambda_no_feedback'],
            'throughput_std': std['normalized_throughput'],
            'mean_delay_std': std['mean_delay'],
            'max_delay_std': std['max_delay'],
            'error': f"{len(failed)} iterações falharam" if failed else "",
        })
        record = {
            'config_hash': experiment.config_hash,
            'cell': cell_index,
            'protocol': experiment.protocol,
            **_cell_labels(cell),
            **summary.to_dict(),
        }
        return base, record

    def run(self) -> ExperimentResult:
        """
        Executa todas as células e iterações e persiste CSV e resumo JSONL

        Returns:
            ExperimentResult
        """
        experiment = self.experiment
        try:
            experiment.validate_or_raise()
            start_time = time.time()
            cells = experiment.cells()
            logger.info(f"Iniciando {experiment.name}: {len(cells)} células × {experiment.iterations} iterações")

            cached_rows: Dict[int, List[Dict]] = {}
            tasks = []
            for cell_index, cell in enumerate(cells):
                cached = self._load_from_cache(self._generate_cache_key(cell_index, cell))
                if cached is not None:
                    cached_rows[cell_index] = cached
                    continue
                tasks.extend((cell_index, cell, iteration) for iteration in range(experiment.iterations))

            fresh_rows = self._run_tasks(tasks)

            table: List[Dict] = []
            summary: List[Dict] = []
            for cell_index, cell in enumerate(cells):
                if cell_index in cached_rows:
                    table.extend(cached_rows[cell_index])
                    summary.append(next(r for r in cached_rows[cell_index] if r.get('_summary'))['_summary'])
                    continue
                rows = sorted((r for r in fresh_rows if r['cell'] == cell_index), key=lambda r: r['iteration'])
                aggregate_row, record = self._aggregate_row(cell_index, cell, rows)
                clean = [{k: v for k, v in r.items() if k != '_metrics'} for r in rows]
                cell_table = clean + [aggregate_row]
                table.extend(cell_table)
                summary.append(record)
                self._save_to_cache(self._generate_cache_key(cell_index, cell),
                                    clean + [{**aggregate_row, '_summary': record}])

            frame = pd.DataFrame(table).reindex(columns=CSV_COLUMNS)
            result = ExperimentResult(rows=frame, summary=summary)
            self._write_results(result)
            if self.config.get('export_graphs'):
                result.files['graph'] = self.export_graphs(result)

            logger.info(f"{experiment.name} concluído em {time.time() - start_time:.1f}s")
            return result

        except Exception as e:
            logger.error(f"Erro na execução do experimento: {str(e)}")
            raise

    def _write_results(self, result: ExperimentResult):
        """Grava o CSV por iteração e o resumo JSONL por célula"""
        os.makedirs(self.output_dir, exist_ok=True)
        stem = f"{self.experiment.name}_{self.experiment.protocol}_{self.experiment.config_hash[:8]}"
        csv_path = os.path.join(self.output_dir, f"{stem}.csv")
        jsonl_path = os.path.join(self.output_dir, f"{stem}_summary.jsonl")

        result.rows.to_csv(csv_path, index=False)
        with open(jsonl_path, 'w', encoding='utf-8') as f:
            for record in result.summary:
                f.write(json.dumps(_json_safe(record), sort_keys=True) + "\n")

        result.files.update({'csv': csv_path, 'summary': jsonl_path})
        logger.info(f"Resultados salvos: {csv_path}")

    def export_graphs(self, result: ExperimentResult) -> Optional[str]:
        """Exporta vazão e atraso médio ao longo da varredura com barras de erro"""
        try:
            import matplotlib
            matplotlib.use('Agg')
            import matplotlib.pyplot as plt

            rows = result.aggregate_rows().sort_values('e1')
            if rows['e1'].isna().all():
                return None

            plt.figure(figsize=(12, 8))
            plt.subplot(2, 1, 1)
            plt.errorbar(rows['e1'], rows['throughput'], yerr=rows['throughput_std'], fmt='b-o', capsize=3)
            plt.title(f"Vazão normalizada - {self.experiment.protocol}")
            plt.ylabel('Pacotes por slot')
            plt.grid(True, alpha=0.3)

            plt.subplot(2, 1, 2)
            plt.errorbar(rows['e1'], rows['mean_delay'], yerr=rows['mean_delay_std'], fmt='r-o', capsize=3)
            plt.title('Atraso médio em ordem')
            plt.xlabel('e1')
            plt.ylabel('Slots')
            plt.grid(True, alpha=0.3)
            plt.tight_layout()

            output_path = os.path.join(self.output_dir, f"{self.experiment.name}_{self.experiment.protocol}.png")
            plt.savefig(output_path, dpi=150, bbox_inches='tight')
            plt.close()
            logger.info(f"Gráfico exportado: {output_path}")
            return output_path
        except Exception as e:
            logger.warning(f"Erro ao exportar gráfico: {str(e)}")
            return None

    def bounds(self, paired: Optional[pd.DataFrame] = None) -> pd.DataFrame:
        """
        Calcula as curvas de limites pedidas na configuração

        Com `paired`, o λ de cada célula vem da fração de slots sem feedback
        medida na simulação correspondente.
        """
        experiment = self.experiment
        settings = dict(experiment.bounds)
        common = {
            'th': experiment.th,
            'P_e': settings.get('P_e', 1e-3),
            'lam': settings.get('lambda', 0.0),
        }
        if experiment.window_factor is not None:
            common['window_factor'] = experiment.window_factor
        elif experiment.o_bar is not None:
            common['o_bar'] = experiment.o_bar

        try:
            cells = experiment.cells()
            if 'rtt_range' in settings:
                low, high = settings['rtt_range'][:2]
                step = settings['rtt_range'][2] if len(settings['rtt_range']) > 2 else 1
                eps = self._bound_eps(cells[0])
                frame = rtt_sweep(eps, range(int(low), int(high) + 1, int(step)), **common)
            elif 'f_values' in settings:
                common.pop('window_factor', None)
                common.pop('o_bar', None)
                frame = f_sweep(self._bound_eps(cells[0]), experiment.rtt, settings['f_values'], **common)
            else:
                rows = []
                for cell_index, cell in enumerate(cells):
                    lam = common['lam']
                    if paired is not None:
                        lam = self._paired_lambda(paired, cell_index, lam)
                    report = self._cell_bounds(cell, {**common, 'lam': lam})
                    rows.append({'cell': cell_index, **_cell_labels(cell), 'lambda': lam, **report.to_dict()})
                frame = pd.DataFrame(rows)

            frame.insert(0, 'config_hash', experiment.config_hash)
            os.makedirs(self.output_dir, exist_ok=True)
            path = os.path.join(self.output_dir, f"{experiment.name}_bounds_{experiment.config_hash[:8]}.csv")
            frame.to_csv(path, index=False)
            logger.info(f"Limites salvos: {path}")
            return frame

        except Exception as e:
            logger.error(f"Erro no cálculo dos limites: {str(e)}")
            raise

    def _bound_eps(self, cell: Dict) -> np.ndarray:
        topology = self.experiment.topology(cell)
        if topology.H > 1:
            raise ConfigError("Varreduras de rtt e f são definidas para redes de um salto")
        return topology.eps[0]

    def _cell_bounds(self, cell: Dict, common: Dict):
        topology = self.experiment.topology(cell)
        inputs = BoundInputs(eps=topology.eps[0], rtt=self.experiment.rtt, **common)
        if topology.H == 1:
            return mp_bounds(inputs)
        matching = decentralized_match(topology.rates, self.experiment.first_hop_order)
        return mh_bounds(inputs, matching, topology.rates,
                         forwarding=self.experiment.effective_recode_mode is RecodeMode.FORWARD_ONLY)

    @staticmethod
    def _paired_lambda(paired: pd.DataFrame, cell_index: int, default: float) -> float:
        rows = paired[(paired['cell'] == cell_index) & (paired['iteration'].astype(str) == 'aggregate')]
        if rows.empty or pd.isna(rows['lambda_no_feedback'].iloc[0]):
            return default
        return float(rows['lambda_no_feedback'].iloc[0])


def compare(simulation: pd.DataFrame, bounds: pd.DataFrame) -> pd.DataFrame:
    """
    Junta as linhas agregadas da simulação com os limites de mesmo (e1, e2, rtt)
    e acrescenta os fatores de comparação
    """
    keys = [k for k in ('e1', 'e2', 'rtt') if k in simulation.columns and k in bounds.columns]
    if not keys:
        raise ConfigError("Tabelas sem colunas em comum (e1, e2, rtt) para a junção")

    sim = simulation[simulation['iteration'].astype(str) == 'aggregate'].copy()
    bound_columns = [c for c in bounds.columns if c not in sim.columns or c in keys]
    merged = sim.merge(bounds[bound_columns], on=keys, how='inner')

    merged['F_eta'] = 100.0 * merged['throughput_lb'] / merged['throughput_ub']
    merged['F_capacity'] = 100.0 * merged['throughput_lb'] / merged['capacity']
    merged['F_D_mean'] = merged['mean_delay'] / merged['genie_delay_lb']
    merged['F_D_max'] = merged['max_delay'] / merged['genie_delay_lb']
    merged['thr_over_lb'] = merged['throughput'] / merged['throughput_lb']
    return merged


def _json_safe(value):
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return None if math.isnan(value) else value
    if isinstance(value, np.integer):
        return int(value)
    return value


def load_results(path: str) -> pd.DataFrame:
    """Lê um CSV de resultados ou de limites"""
    return pd.read_csv(path)
