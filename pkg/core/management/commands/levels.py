from core.exceptions import ConfigError
from core.logging_config import RunAuditLogger
from core.management.base import RelaxCommand, float_pair
from core.models import Params
from core.relaxvars import analyze_levels, level_grid
from core.reports import write_json, write_levels_csv


class Command(RelaxCommand):
    """Выборка W и Z на прямоугольнике и геометрия подуровневых множеств"""

    help = 'Sample W and Z on a (rho, b) box for contouring'
    parallel = True

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--gamma', type=float, default=1.5)
        parser.add_argument('--b0', type=float, default=1.0)
        parser.add_argument('--rho-range', dest='rho_range', default='0.05,3.05')
        parser.add_argument('--b-range', dest='b_range', default='-2,2')
        parser.add_argument('--n-rho', dest='n_rho', type=int, default=61)
        parser.add_argument('--n-b', dest='n_b', type=int, default=41)
        parser.add_argument('--reference', default='1.0,0.5', help='Опорное состояние rho,b для W₀ и Z₀')

    def execute_command(self, **options):
        params = Params(options['gamma'], options['b0'])
        rho_range = float_pair(options['rho_range'])
        b_range = float_pair(options['b_range'])
        reference = float_pair(options['reference'])
        out = self.output_dir(options)
        workers = self.workers(options)
        quad = self.quad_options()

        try:
            tables = {
                which: level_grid(params, rho_range, b_range, options['n_rho'], options['n_b'],
                                  which, workers=workers, **quad)
                for which in ('W', 'Z')
            }
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

        for which, table in tables.items():
            write_levels_csv(out / f'levels_{which}.csv', table)

        analysis = analyze_levels(tables['W'], tables['Z'], reference, **quad)
        document = {
            'params': {'gamma': params.gamma, 'b0': params.b0},
            'rho_range': list(rho_range),
            'b_range': list(b_range),
            'n_rho': options['n_rho'],
            'n_b': options['n_b'],
            'failed_points': {which: len(table.errors) for which, table in tables.items()},
            'analysis': analysis.as_dict(),
        }
        write_json(out / 'levels_analysis.json', document)

        RunAuditLogger.log_check('w_sublevel_bounded', 0.0, 0.0, analysis.w_bounded_above)
        RunAuditLogger.log_check('z_sublevel_excludes_low_rho', 0.0, 0.0, analysis.z_excludes_low_rho)
        self.stdout.write(f'singular point: {analysis.singular_point}')
        self.stdout.write(f'rho_Z0: {analysis.rho_z0:.6g}')
        self.stdout.write(self.style.SUCCESS(f'Levels written to {out}'))
