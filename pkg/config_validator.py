#!/usr/bin/env python3
"""
Config Validator Module
Relatório de validação de um experimento: ambiente, arquivo JSON, invariantes
de topologia e protocolo e diretório de saída
Projeto: AC-RLNC Multipath Simulator
"""

import os
import sys
import json
import logging
import platform
import tempfile
import importlib.util
from typing import Callable, Dict, List, Optional, Tuple

import psutil

from experiment_runner import ConfigError, ExperimentConfig

logger = logging.getLogger(__name__)

MIN_PYTHON = (3, 9)
REQUIRED_MODULES = (
    ('numpy', 'numpy'),
    ('scipy', 'scipy'),
    ('pandas', 'pandas'),
    ('matplotlib', 'matplotlib'),
    ('psutil', 'psutil'),
    ('dotenv', 'python-dotenv'),
)
LOW_PACKET_COUNT = 100
REPORT_SECTIONS = (("SUCESSOS", 'passed'), ("AVISOS", 'warnings'), ("ERROS", 'errors'))


class ConfigValidator:
    """
    Coleta sucessos, avisos e erros de todas as verificações antes de
    reportar; nenhuma verificação interrompe as seguintes.
    """

    def __init__(self, config_path: str, output_dir: Optional[str] = None):
        self.config_path = config_path
        self.output_dir = output_dir or os.getenv('ACRLNC_OUTPUT_DIR', 'results')
        self.experiment: Optional[ExperimentConfig] = None
        self.validation_results = {'passed': [], 'warnings': [], 'errors': [], 'system_info': {}}

    def _ok(self, message: str) -> bool:
        self.validation_results['passed'].append(message)
        return True

    def _warn(self, message: str):
        self.validation_results['warnings'].append(message)

    def _fail(self, *messages: str) -> bool:
        self.validation_results['errors'].extend(messages)
        return False

    def check_python(self) -> bool:
        version = platform.python_version()
        self.validation_results['system_info']['python_version'] = version
        if sys.version_info[:2] < MIN_PYTHON:
            return self._fail(f"Python {version} não suportado; requerido {MIN_PYTHON[0]}.{MIN_PYTHON[1]}+")
        return self._ok(f"Python {version}")

    def check_packages(self) -> bool:
        missing = [name for module, name in REQUIRED_MODULES if importlib.util.find_spec(module) is None]
        if missing:
            return self._fail(f"Dependências faltando: {', '.join(missing)} (pip install -r requirements.txt)")
        return self._ok(f"{len(REQUIRED_MODULES)} dependências disponíveis")

    def check_config_file(self) -> bool:
        if not os.path.isfile(self.config_path):
            return self._fail(f"Arquivo de configuração não encontrado: {self.config_path}")
        try:
            with open(self.config_path, 'r', encoding='utf-8') as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            return self._fail(f"JSON inválido em {self.config_path}: linha {e.lineno}, coluna {e.colno}: {e.msg}")
        if not isinstance(data, dict):
            return self._fail("A configuração deve ser um objeto JSON")
        try:
            self.experiment = ExperimentConfig.from_dict(data)
        except (ConfigError, TypeError) as e:
            return self._fail(f"Configuração inválida: {str(e)}")
        return self._ok(f"Configuração '{self.experiment.name}' carregada")

    def check_experiment(self) -> bool:
        """Invariantes da topologia e compatibilidade protocolo/feedback em todas as células"""
        if self.experiment is None:
            return False
        errors = self.experiment.validate()
        if errors:
            return self._fail(*errors)

        experiment = self.experiment
        cells = experiment.cells()
        if experiment.packet_count < LOW_PACKET_COUNT:
            self._warn(f"packet_count baixo ({experiment.packet_count}): médias com alta variância")
        if experiment.iterations == 1 and len(cells) > 1:
            self._warn("Uma iteração por célula: o desvio padrão não será estimado")
        topology = experiment.topology(cells[0])
        return self._ok(
            f"{experiment.protocol} em H={topology.H}, P={topology.P}, RTT={topology.rtt_slots}: "
            f"{len(cells)} células × {experiment.iterations} iterações"
        )

    def check_output_directory(self) -> bool:
        try:
            os.makedirs(self.output_dir, exist_ok=True)
            with tempfile.TemporaryFile(dir=self.output_dir):
                pass
        except OSError as e:
            return self._fail(f"Diretório de saída sem escrita ({self.output_dir}): {str(e)}")
        return self._ok(f"Diretório de saída: {self.output_dir}")

    def check_workers(self) -> bool:
        cores = psutil.cpu_count() or 1
        self.validation_results['system_info'].update({
            'os': f"{platform.system()} {platform.release()}",
            'cpu_count': cores,
            'memory_gb': round(psutil.virtual_memory().total / 1024 ** 3, 1),
        })
        if self.experiment is not None and self.experiment.max_workers > cores:
            self._warn(f"max_workers={self.experiment.max_workers} acima dos {cores} núcleos disponíveis")
        return True

    def checks(self) -> List[Tuple[str, Callable[[], bool]]]:
        return [
            ("Python", self.check_python),
            ("Dependências", self.check_packages),
            ("Arquivo", self.check_config_file),
            ("Experimento", self.check_experiment),
            ("Saída", self.check_output_directory),
            ("Recursos", self.check_workers),
        ]

    def run_full_validation(self) -> Dict:
        """Executa todas as verificações e resume o resultado"""
        checks = self.checks()
        for name, check in checks:
            try:
                outcome = check()
            except Exception as e:
                outcome = self._fail(f"Erro na verificação '{name}': {str(e)}")
            logger.debug(f"{'✓' if outcome else '✗'} {name}")

        errors = len(self.validation_results['errors'])
        self.validation_results['summary'] = {
            'checks': len(checks),
            'passed': len(self.validation_results['passed']),
            'warnings': len(self.validation_results['warnings']),
            'errors': errors,
            'success': errors == 0,
        }
        if errors:
            logger.error(f"Validação de {self.config_path}: {errors} erros")
        return self.validation_results

    def print_validation_report(self):
        print("\n" + "=" * 60)
        print(f"VALIDAÇÃO: {self.config_path}")
        print("=" * 60)
        for title, key in REPORT_SECTIONS:
            items = self.validation_results[key]
            if items:
                print(f"\n{title} ({len(items)}):")
                for item in items:
                    print(f"   • {item}")
        print("\n" + "=" * 60)
        if self.validation_results.get('summary', {}).get('success', False):
            print("CONFIGURAÇÃO VÁLIDA")
        else:
            print("CONFIGURAÇÃO POSSUI PROBLEMAS QUE PRECISAM SER CORRIGIDOS")
