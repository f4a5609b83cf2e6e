"""
Файлы результатов: временной ряд и снимки в CSV, итоговые отчеты в JSON.

Числа в CSV пишутся с 17 значащими цифрами, так что повторное чтение
восстанавливает значения бит в бит. JSON пишется с сортировкой ключей,
без отметок времени: одинаковые входные данные дают одинаковые байты.
"""
import csv
import json
import logging
import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

from core.diagnostics import (
    DiagnosticsRecord,
    ImpliedEnvelope,
    Reference,
    decay_fits,
    linear_rates,
    verdicts,
)
from core.integrator import Trajectory
from core.models import Params, State, velocity
from core.relaxvars import LevelTable
from core.schemas import RunConfig, RunSummary

logger = logging.getLogger(__name__)

BASE_COLUMNS = (
    't', 'mass', 'flux_mean', 'energy', 'dissipation', 'min_rho', 'max_rho', 'max_abs_b',
    'min_w', 'min_z', 'l2_rho_dev', 'l2_b_dev',
)
TAIL_COLUMNS = ('coupled1', 'coupled2', 'dt', 'weighted_hs', 'u_l2')

PathLike = Union[str, Path]


def fmt(value: float) -> str:
    return format(float(value), '.17g')


def series_columns(s_list: Sequence[int]) -> List[str]:
    hs = [name for s in s_list for name in (f"hs_rho_{s}", f"hs_b_{s}")]
    return list(BASE_COLUMNS) + hs + list(TAIL_COLUMNS)


def _prepare(path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def write_series_csv(path: PathLike, records: Sequence[DiagnosticsRecord]) -> Path:
    s_list = sorted(records[0].hs_rho) if records else []
    columns = series_columns(s_list)
    path = _prepare(path)
    with path.open('w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(columns)
        for rec in records:
            writer.writerow([fmt(rec.value(name)) for name in columns])
    logger.debug(f"Wrote {len(records)} records to {path}")
    return path


def read_series_csv(path: PathLike) -> Tuple[List[str], List[List[float]]]:
    with Path(path).open(newline='', encoding='utf-8') as handle:
        reader = csv.reader(handle)
        header = next(reader)
        rows = [[float(cell) for cell in row] for row in reader if row]
    return header, rows


def write_snapshot_csv(path: PathLike, state: State, params: Params) -> Path:
    """Колонки x, rho, b, ux, uz"""
    u = velocity(state, params)
    path = _prepare(path)
    columns = zip(state.grid.x, state.rho.values, state.b.values, u.ux.values, u.uz.values)
    with path.open('w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(['x', 'rho', 'b', 'ux', 'uz'])
        for row in columns:
            writer.writerow([fmt(v) for v in row])
    return path


def snapshot_name(tag: str, time: float) -> str:
    return f"{tag}_snapshot_{format(time, 'g')}.csv"


def write_levels_csv(path: PathLike, table: LevelTable) -> Path:
    """
    Колонки rho, b, value, branch, exponent, error. Бесконечная ветка
    записывается как value = 0 с branch = infinite; сбой точки - branch = error.
    """
    path = _prepare(path)
    with path.open('w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(['rho', 'b', 'value', 'branch', 'exponent', 'error'])
        for row in table.rows:
            writer.writerow([fmt(row.rho), fmt(row.b), fmt(row.value), row.branch,
                             fmt(row.exponent), row.error])
    return path


def dumps(document: dict) -> str:
    return json.dumps(document, indent=2, sort_keys=True) + '\n'


def write_json(path: PathLike, document: dict) -> Path:
    path = _prepare(path)
    path.write_text(dumps(document), encoding='utf-8')
    return path


def build_summary(config: RunConfig, trajectory: Trajectory, params: Params,
                  length: float, reference: Optional[Reference] = None,
                  wall_clock: float = 0.0, envelope: Optional[ImpliedEnvelope] = None) -> RunSummary:
    """Вердикты, подгонки и предсказанные скорости по записанному ряду"""
    records = trajectory.records
    report = verdicts(records, envelope)
    final_time = records[-1].time if records else None

    predicted: Dict[str, float] = {}
    fits: dict = {}
    if records:
        names = ['l2_rho_dev', 'l2_b_dev']
        if reference is not None and reference.b_bar != 0.0:
            names += ['coupled1', 'coupled2']
        fits = decay_fits(records, names)
    if reference is not None:
        predicted = linear_rates(reference, params, length)
        # отклонение B гаснет со скоростью своей младшей возбужденной моды
        b_modes = [term.mode for term in config.initial.b_modes if term.amplitude != 0.0]
        if 'l2_b_dev' in predicted and b_modes and min(b_modes) != 1:
            predicted['l2_b_dev'] = linear_rates(reference, params, length, mode=min(b_modes))['l2_b_dev']

    energy_residual = report.get('energy_balance_residual')
    if energy_residual is not None and math.isnan(energy_residual):
        energy_residual = None

    return RunSummary(
        scenario=config.scenario,
        halting_cause=trajectory.cause.value,
        exit_code=trajectory.exit_code,
        error=trajectory.error,
        steps=trajectory.steps,
        records=len(records),
        final_time=final_time,
        wall_clock_s=wall_clock,
        conservation=report.get('conservation', {}),
        monotonicity=report.get('monotonicity', {}),
        z_ceiling_passed=report.get('z_ceiling_passed'),
        energy_balance_residual=energy_residual,
        envelopes=report.get('envelopes', {}),
        decay_fits=fits,
        predicted_rates=predicted,
        config=config.model_dump(),
    )
