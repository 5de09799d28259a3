#!/usr/bin/env python3
"""
Logging Configuration
Handlers com rotação, saída de console e registros padronizados de
simulações, varreduras e limites
Projeto: AC-RLNC Multipath Simulator
"""

import os
import re
import time
import logging
import logging.handlers
import platform
import traceback
from typing import Dict, Iterable, Optional

import psutil

PROJECT_LOGGER = 'ACRLNC'
SIZE_UNITS = {'': 1, 'KB': 1024, 'MB': 1024 ** 2, 'GB': 1024 ** 3}
CONSOLE_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'
RUN_METRIC_NAMES = ('normalized_throughput', 'mean_delay', 'max_delay')
BOUND_NAMES = ('throughput_ub', 'throughput_lb', 'capacity', 'mean_delay_ub',
               'max_delay_ub', 'genie_delay_lb', 'prod_delay_lb')


def default_log_config() -> Dict:
    """Configuração padrão; ACRLNC_LOG_LEVEL e ACRLNC_LOG_FILE sobrescrevem nível e arquivo"""
    return {
        'level': os.getenv('ACRLNC_LOG_LEVEL', 'INFO'),
        'file': os.getenv('ACRLNC_LOG_FILE', 'logs/acrlnc.log'),
        'max_size': '10MB',
        'backup_count': 5,
        'format': '%(asctime)s - %(name)s - %(levelname)s - %(funcName)s:%(lineno)d - %(message)s',
        'datefmt': '%Y-%m-%d %H:%M:%S',
        'rotation': 'time',  # 'time' ou 'size'
        'when': 'midnight',
        'interval': 1,
        'console_output': True,
    }


def parse_size(text: str) -> int:
    """'10MB' -> bytes; sem unidade, o valor já está em bytes"""
    match = re.fullmatch(r'\s*(\d+)\s*([KMG]B)?\s*', str(text).upper())
    if not match:
        raise ValueError(f"Tamanho de log inválido: '{text}'")
    return int(match.group(1)) * SIZE_UNITS[match.group(2) or '']


def _file_handler(config: Dict) -> logging.Handler:
    if config['rotation'] == 'size':
        return logging.handlers.RotatingFileHandler(
            config['file'], maxBytes=parse_size(config['max_size']),
            backupCount=config['backup_count'], encoding='utf-8')
    return logging.handlers.TimedRotatingFileHandler(
        config['file'], when=config['when'], interval=config['interval'],
        backupCount=config['backup_count'], encoding='utf-8')


class SimulationLogger:
    """
    Logging do simulador

    Os handlers ficam no logger raiz: os loggers de módulo
    (logging.getLogger(__name__)) e os filhos ACRLNC.<nome> escrevem no
    mesmo arquivo.
    """

    def __init__(self, config: Dict = None):
        self.config = {**default_log_config(), **(config or {})}
        self.logger = logging.getLogger(PROJECT_LOGGER)
        self.setup_logging()

    def setup_logging(self):
        try:
            log_dir = os.path.dirname(self.config['file'])
            if log_dir:
                os.makedirs(log_dir, exist_ok=True)

            root = logging.getLogger()
            root.handlers.clear()
            root.setLevel(getattr(logging, str(self.config['level']).upper(), logging.INFO))

            handler = _file_handler(self.config)
            handler.setFormatter(logging.Formatter(self.config['format'], datefmt=self.config['datefmt']))
            root.addHandler(handler)

            if self.config['console_output']:
                console = logging.StreamHandler()
                console.setFormatter(logging.Formatter(CONSOLE_FORMAT, datefmt='%H:%M:%S'))
                root.addHandler(console)

            self.logger.debug(f"Logging iniciado: nível {self.config['level']}, arquivo {self.config['file']}")
        except Exception as e:
            print(f"Erro ao configurar logging: {str(e)}")
            raise

    def _parse_size(self, size_str: str) -> int:
        return parse_size(size_str)

    def get_logger(self, name: Optional[str] = None) -> logging.Logger:
        return self.logger.getChild(name) if name else self.logger

    def _banner(self, rule: str, title: str, fields: Dict, level: int = logging.INFO):
        self.logger.log(level, rule * 50)
        self.logger.log(level, title)
        for key, value in fields.items():
            self.logger.log(level, f"  {key}: {value}")
        self.logger.log(level, rule * 50)

    def log_process_start(self, process_name: str, **kwargs):
        self._banner("=", f"INICIANDO: {process_name}", kwargs)

    def log_process_end(self, process_name: str, success: bool = True, **kwargs):
        status = "SUCESSO" if success else "ERRO"
        self._banner("-", f"FINALIZANDO: {process_name} - {status}", kwargs,
                     logging.INFO if success else logging.WARNING)

    def log_step(self, step_name: str, step_number: int = None, total_steps: int = None):
        prefix = f"ETAPA {step_number}/{total_steps}" if step_number and total_steps else "ETAPA"
        self.logger.info(f"{prefix}: {step_name}")

    def log_progress(self, current: int, total: int, item_name: str = "item"):
        log_progress(current, total, item_name, self.logger)

    def log_run_metrics(self, summary: Dict):
        """Resumo de uma célula: média ± desvio das métricas de vazão e atraso"""
        mean, std = summary.get('mean', {}), summary.get('std', {})
        # NaN marca rótulo ausente
        cell = {k: summary[k] for k in ('e1', 'e2') if k in summary and summary[k] == summary[k]}
        self.logger.info(f"CÉLULA {summary.get('cell', '?')} {cell} ({summary.get('count', 0)} iterações):")
        for name in _present(RUN_METRIC_NAMES, mean):
            self.logger.info(f"  {name}: {mean[name]:.4f} ± {std.get(name, 0.0):.4f}")

    def log_bound_report(self, report: Dict):
        self.logger.info("LIMITES:")
        for name in _present(BOUND_NAMES, report):
            self.logger.info(f"  {name}: {report[name]:.4f}")
        if report.get('diagnostics'):
            self.logger.warning(f"  Diagnósticos: {report['diagnostics']}")

    def log_error_details(self, error: Exception, context: str = ""):
        """Erro com tipo, mensagem e pilha da exceção em tratamento"""
        stack = [line for line in traceback.format_exc().splitlines() if line.strip()]
        self._banner("*", f"ERRO DETALHADO: {context}",
                     {'Tipo': type(error).__name__, 'Mensagem': str(error)}, logging.ERROR)
        for line in stack:
            self.logger.error(f"  {line}")

    def log_system_info(self):
        memory = psutil.virtual_memory()
        self.logger.info(
            f"Sistema: {platform.system()} {platform.release()}, Python {platform.python_version()}, "
            f"{psutil.cpu_count()} CPUs, RAM {memory.total / 1024 ** 3:.1f}GB "
            f"({memory.percent:.0f}% em uso), disco livre {psutil.disk_usage('.').free / 1024 ** 3:.1f}GB"
        )

    def cleanup_old_logs(self, max_age_days: int = 30) -> int:
        """Remove arquivos rotacionados mais antigos que max_age_days; devolve quantos saíram"""
        log_dir = os.path.dirname(self.config['file'])
        if not log_dir or not os.path.isdir(log_dir):
            return 0

        cutoff = time.time() - max_age_days * 86400
        removed = 0
        with os.scandir(log_dir) as entries:
            for entry in entries:
                if '.log' not in entry.name or entry.stat().st_mtime >= cutoff:
                    continue
                try:
                    os.remove(entry.path)
                    removed += 1
                except OSError as e:
                    self.logger.error(f"Erro ao remover log {entry.name}: {str(e)}")
        if removed:
            self.logger.info(f"Limpeza de logs: {removed} arquivos removidos")
        return removed


def _present(names: Iterable[str], values: Dict):
    return [name for name in names if name in values]


def log_progress(current: int, total: int, item_name: str = "item", logger: logging.Logger = None):
    """Progresso no logger do projeto, sem exigir a configuração global"""
    logger = logger or logging.getLogger(PROJECT_LOGGER)
    percentage = (current / total) * 100 if total else 100.0
    logger.info(f"Progresso: {current}/{total} {item_name}s ({percentage:.1f}%)")


_global_logger: Optional[SimulationLogger] = None


def setup_global_logger(config: Dict = None) -> SimulationLogger:
    global _global_logger
    _global_logger = SimulationLogger(config)
    return _global_logger


def get_logger(name: str = None) -> logging.Logger:
    if _global_logger is None:
        setup_global_logger()
    return _global_logger.get_logger(name)
