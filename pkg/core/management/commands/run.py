from core.config import build_run, with_overrides
from core.diagnostics import implied_envelope
from core.integrator import HaltingCause, run
from core.management.base import ConfigCommand
from core.observers import DiagnosticsObserver, RunLoggingObserver
from core.reports import build_summary, snapshot_name, write_json, write_series_csv, write_snapshot_csv


class Command(ConfigCommand):
    """Интегрирование сценария: временной ряд, снимки и итоговый отчет"""

    help = 'Run a relaxation scenario and write the time series, snapshots and summary'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--n', type=int, help='Число узлов сетки')
        parser.add_argument('--t-end', type=float, dest='t_end', help='Время окончания')

    def execute_command(self, **options):
        config = self.load(options)
        overrides = {}
        if options.get('n') is not None:
            overrides['grid'] = {'n': options['n']}
        if options.get('t_end') is not None:
            overrides['control'] = {'t_end': options['t_end']}
        if overrides:
            config = with_overrides(config, **overrides)

        setup = build_run(config)
        out = self.output_dir(options, config.output.directory)
        prefix = config.output.prefix or config.scenario

        timer = RunLoggingObserver(config.scenario)
        observers = [
            DiagnosticsObserver(
                setup.reference,
                s_list=config.diagnostics.sobolev_orders,
                weighted_order=config.diagnostics.weighted_order,
                **self.quad_options(),
            ),
            timer,
        ]
        self.stdout.write(f'Running {config.scenario}: n={setup.grid.n}, t_end={setup.control.t_end}')
        trajectory = run(setup.state, setup.params, setup.control, observers)

        write_series_csv(out / f'{prefix}_series.csv', trajectory.records)
        for snapshot in trajectory.snapshots:
            write_snapshot_csv(out / snapshot_name(prefix, snapshot.time), snapshot, setup.params)
        envelope = None
        if trajectory.records:
            envelope = implied_envelope(setup.params, trajectory.records[0], **self.quad_options())
        summary = build_summary(config, trajectory, setup.params, setup.grid.length,
                                setup.reference, timer.wall_clock, envelope)
        write_json(out / f'{prefix}_summary.json', summary.model_dump())

        message = (f'{trajectory.cause.value}: steps={trajectory.steps}, '
                   f'records={len(trajectory.records)}, output={out}')
        if trajectory.cause is HaltingCause.COMPLETED:
            self.stdout.write(self.style.SUCCESS(message))
            return
        self.stderr.write(self.style.ERROR(f"{message}; {trajectory.error['detail']}"))
        raise SystemExit(trajectory.exit_code)
