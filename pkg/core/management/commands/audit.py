from core.audit import DEFAULT_BOX, ensure_passed, run_audit
from core.management.base import RelaxCommand
from core.models import Params
from core.reports import write_json


class Command(RelaxCommand):
    """Проверка производных и тождеств переменных релаксации"""

    help = 'Audit analytic derivatives and identities of the relaxation variables'
    parallel = True

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--gamma', type=float, default=1.5)
        parser.add_argument('--b0', type=float, default=1.0)
        parser.add_argument('--points', type=int, default=200)
        parser.add_argument('--seed', type=int, default=1)
        parser.add_argument('--tol', type=float, help='Заменяет все допуски')

    def execute_command(self, **options):
        params = Params(options['gamma'], options['b0'])
        report = run_audit(
            params,
            points=options['points'],
            seed=options['seed'],
            tol=options.get('tol'),
            workers=self.workers(options),
            box=DEFAULT_BOX,
        )
        path = write_json(self.output_dir(options) / 'audit.json', report)

        width = max(len(name) for name in report['checks'])
        for name, check in report['checks'].items():
            line = f"{name:<{width}}  {check['max_error']:.3e}  <= {check['tolerance']:.1e}"
            style = self.style.SUCCESS if check['passed'] else self.style.ERROR
            self.stdout.write(style(f"{line}  {'ok' if check['passed'] else 'FAIL'}"))
        for error in report['errors']:
            self.stdout.write(self.style.ERROR(error))

        ensure_passed(report)
        self.stdout.write(self.style.SUCCESS(f'Audit passed, report written to {path}'))
