from core.converge import run_converge
from core.management.base import ConfigCommand
from core.reports import write_json


class Command(ConfigCommand):
    """Сходимость по сетке, регуляризации и шагу по времени"""

    help = 'Run the resolution, regularization and time-step convergence sweep'
    parallel = True
    default_scenario = 'converge-base'

    def execute_command(self, **options):
        config = self.load(options)
        report = run_converge(config, workers=self.workers(options))
        path = write_json(self.output_dir(options, config.output.directory) / 'converge.json', report)

        failed = [cell for cell in report['cells'] if cell['halting_cause'] != 'completed']
        for cell in failed:
            self.stdout.write(self.style.WARNING(
                f"cell n={cell['n']}, epsilon={cell['epsilon']}: {cell['halting_cause']}"
            ))
        spatial = report.get('spatial', {})
        if 'orders' in spatial:
            self.stdout.write(f"spatial orders: {spatial['orders']}")
        temporal = report.get('temporal', {})
        if temporal.get('order') is not None:
            self.stdout.write(f"temporal order: {temporal['order']:.3f}")
        self.stdout.write(self.style.SUCCESS(f'Convergence report written to {path}'))
