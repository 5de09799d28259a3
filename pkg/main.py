#!/usr/bin/env python3
"""
AC-RLNC Multipath Simulator
Simulação slot a slot de AC-RLNC em redes multipath e multi-hop, protocolos de
referência, limites analíticos e comparação entre simulação e limites.
Projeto: AC-RLNC Multipath Simulator
"""

import os
import sys
import argparse
import logging
from typing import List, Optional

import numpy as np
import pandas as pd
from dotenv import load_dotenv

from config_validator import ConfigValidator
from experiment_runner import ConfigError, ExperimentConfig, ExperimentPipeline, compare, load_results
from logging_config import setup_global_logger
from path_matching import Matching, eta_max, min_cut_capacity, natural_match

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INVALID_CONFIG = 2

BOUNDS_PRINT_COLUMNS = ('cell', 'e1', 'e2', 'rtt', 'f', 'lambda', 'throughput_ub', 'throughput_lb',
                        'capacity', 'mean_delay_ub', 'max_delay_ub', 'genie_delay_lb')


def build_parser() -> argparse.ArgumentParser:
    """Parser de linha de comando com os subcomandos do simulador"""
    parser = argparse.ArgumentParser(
        prog='acrlnc',
        description='Simulador AC-RLNC multipath/multi-hop e calculadora de limites'
    )
    subparsers = parser.add_subparsers(dest='command', required=True)

    def add_common(sub: argparse.ArgumentParser):
        sub.add_argument('--config', required=True, help='Arquivo JSON do experimento')
        sub.add_argument('--seed', type=int, help='Sobrescreve base_seed')
        sub.add_argument('--out', help='Diretório de saída (padrão: ACRLNC_OUTPUT_DIR ou results/)')
        sub.add_argument('--parallel', type=int, help='Número de workers')
        sub.add_argument('--protocol', help='Sobrescreve o protocolo do arquivo')
        sub.add_argument('--iterations', type=int, help='Sobrescreve o número de iterações')
        sub.add_argument('--packets', type=int, help='Sobrescreve packet_count')

    add_common(subparsers.add_parser('simulate', help='Executa as iterações de todas as células'))
    bounds = subparsers.add_parser('bounds', help='Calcula as curvas de limites')
    add_common(bounds)
    bounds.add_argument('--paired', help='CSV de simulação para medir o λ de cada célula')
    add_common(subparsers.add_parser('sweep', help='Simulação, limites pareados e comparação'))

    comparison = subparsers.add_parser('compare', help='Junta um CSV de simulação e um de limites')
    comparison.add_argument('--sim', required=True, help='CSV de simulação')
    comparison.add_argument('--bounds', required=True, help='CSV de limites')
    comparison.add_argument('--out', help='Diretório de saída')

    matching = subparsers.add_parser('matching', help='Casamento natural das células de uma topologia multi-hop')
    matching.add_argument('--config', required=True, help='Arquivo JSON do experimento')

    validate = subparsers.add_parser('validate', help='Relatório de validação de um experimento')
    validate.add_argument('--config', required=True, help='Arquivo JSON do experimento')
    validate.add_argument('--out', help='Diretório de saída')

    return parser


def load_experiment(args: argparse.Namespace) -> ExperimentConfig:
    """Valida o arquivo e aplica as sobrescritas da linha de comando"""
    validator = ConfigValidator(args.config, getattr(args, 'out', None))
    results = validator.run_full_validation()
    if not results['summary']['success']:
        validator.print_validation_report()
        raise ConfigError(results['errors'])

    experiment = validator.experiment
    overrides = {
        'base_seed': getattr(args, 'seed', None),
        'max_workers': getattr(args, 'parallel', None),
        'protocol': getattr(args, 'protocol', None),
        'iterations': getattr(args, 'iterations', None),
        'packet_count': getattr(args, 'packets', None),
    }
    data = experiment.to_dict()
    data.update({k: v for k, v in overrides.items() if v is not None})
    experiment = ExperimentConfig.from_dict(data)
    experiment.validate_or_raise()
    return experiment


def make_pipeline(experiment: ExperimentConfig, out: Optional[str]) -> ExperimentPipeline:
    return ExperimentPipeline(experiment, {
        'cache_enabled': experiment.cache_enabled,
        'cache_dir': experiment.cache_dir,
        'max_workers': experiment.max_workers,
        'output_dir': out or os.getenv('ACRLNC_OUTPUT_DIR', 'results'),
        'export_graphs': experiment.export_graphs,
        'progress_callback': None,
        'use_processes': True,
    })


def cmd_simulate(args, app_logger) -> int:
    experiment = load_experiment(args)
    app_logger.log_process_start("Simulação", experimento=experiment.name, protocolo=experiment.protocol,
                                 hash=experiment.config_hash[:8])
    app_logger.log_system_info()
    result = make_pipeline(experiment, args.out).run()
    for record in result.summary:
        app_logger.log_run_metrics(record)
    failed = int((result.rows['error'].fillna('') != '').sum())
    app_logger.log_process_end("Simulação", success=failed == 0, arquivo=result.files.get('csv'))
    print(result.files.get('csv'))
    return EXIT_OK if failed == 0 else EXIT_FAILURE


def cmd_bounds(args, app_logger) -> int:
    experiment = load_experiment(args)
    paired = load_results(args.paired) if getattr(args, 'paired', None) else None
    frame = make_pipeline(experiment, args.out).bounds(paired)
    for record in frame.to_dict('records'):
        app_logger.log_bound_report(record)
    columns = [c for c in BOUNDS_PRINT_COLUMNS if c in frame.columns]
    print(frame[columns].to_string(index=False))
    return EXIT_OK


def cmd_sweep(args, app_logger) -> int:
    experiment = load_experiment(args)
    pipeline = make_pipeline(experiment, args.out)
    app_logger.log_step("Simulação", 1, 3)
    result = pipeline.run()
    app_logger.log_step("Limites pareados", 2, 3)
    bounds = pipeline.bounds(result.rows)
    app_logger.log_step("Comparação", 3, 3)
    merged = compare(result.rows, bounds)
    path = os.path.join(pipeline.output_dir, f"{experiment.name}_compare_{experiment.config_hash[:8]}.csv")
    merged.to_csv(path, index=False)
    print(path)
    return EXIT_OK


def cmd_compare(args, app_logger) -> int:
    merged = compare(load_results(args.sim), load_results(args.bounds))
    out = args.out or os.getenv('ACRLNC_OUTPUT_DIR', 'results')
    os.makedirs(out, exist_ok=True)
    stem = os.path.splitext(os.path.basename(args.sim))[0]
    path = os.path.join(out, f"{stem}_compare.csv")
    merged.to_csv(path, index=False)
    print(path)
    return EXIT_OK


def format_matching(matching: Matching) -> List[str]:
    L, G = matching.to_printed()
    lines = ["L ="] + [f"  {row.tolist()}" for row in L]
    lines += ["G ="] + [f"  {row.tolist()}" for row in G]
    return lines


def cmd_matching(args, app_logger) -> int:
    experiment = ExperimentConfig.load(args.config)
    experiment.validate_or_raise()
    for cell_index, cell in enumerate(experiment.cells()):
        rates = experiment.topology(cell).rates
        matching = natural_match(rates, experiment.first_hop_order)
        naive = Matching.identity(rates.shape[1], rates.shape[0])
        print(f"Célula {cell_index} {cell}")
        for line in format_matching(matching):
            print(line)
        print(f"  η ingênuo = {eta_max(naive, rates):.3f}")
        print(f"  η natural = {eta_max(matching, rates):.3f}")
        print(f"  capacidade (corte mínimo) = {min_cut_capacity(rates):.3f}")
    return EXIT_OK


def cmd_validate(args, app_logger) -> int:
    validator = ConfigValidator(args.config, args.out)
    results = validator.run_full_validation()
    validator.print_validation_report()
    return EXIT_OK if results['summary']['success'] else EXIT_INVALID_CONFIG


COMMANDS = {
    'simulate': cmd_simulate,
    'bounds': cmd_bounds,
    'sweep': cmd_sweep,
    'compare': cmd_compare,
    'matching': cmd_matching,
    'validate': cmd_validate,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Ponto de entrada; devolve o código de saída"""
    load_dotenv()
    args = build_parser().parse_args(argv)
    app_logger = setup_global_logger()
    app_logger.cleanup_old_logs()
    np.set_printoptions(precision=3, suppress=True)
    pd.set_option('display.width', 160)

    try:
        return COMMANDS[args.command](args, app_logger)
    except ConfigError as e:
        print(f"Configuração inválida: {str(e)}", file=sys.stderr)
        for error in e.errors:
            logging.getLogger(__name__).error(f"  • {error}")
        return EXIT_INVALID_CONFIG
    except KeyboardInterrupt:
        print("\nInterrompido pelo usuário", file=sys.stderr)
        return EXIT_FAILURE
    except Exception as e:
        print(f"Erro fatal: {str(e)}", file=sys.stderr)
        app_logger.log_error_details(e, args.command)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
