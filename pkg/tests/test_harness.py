import configparser
import math
import os
from dataclasses import replace
from unittest import mock, skipUnless

import numpy as np
from django.test import SimpleTestCase
from PIL import Image

from qnet_scheduling.exceptions import SimulationError
from qnet_scheduling.harness import (
    CSV_HEADER, SimConfig, SweepPoint, SweepResult, SweepSpec, read_csv,
    render_heatmap, run_simulation, run_sweep, write_csv,
)
from qnet_scheduling.policies import GLOBAL_MW, GREEDY, LOCAL_MW, PolicyConfig

from .helpers import abcdef_spec, line_spec, temp_path


SLOW_TESTS = os.environ.get('QNET_SCHEDULING_SLOW_TESTS') == '1'


def small_sweep(**kwargs):
    values = {
        'axes': [('A', 'E'), ('B', 'F')],
        'beta1': (0.0, 0.4, 2),
        'beta2': (0.0, 0.4, 2),
        'base_seed': 3,
        'replications': 1,
    }
    values.update(kwargs)
    return SweepSpec(**values)


class RunSimulationTestCase(SimpleTestCase):

    def test_idle_network(self):
        cfg = SimConfig(spec=line_spec('ABCD', alpha=0.0), policy=PolicyConfig(kind=GREEDY), steps=1)
        report = run_simulation(cfg)
        self.assertEqual(report.final_q_total, 0)
        self.assertEqual(report.final_d_total, 0)
        self.assertEqual(report.commodities[0].arrived, 0)
        self.assertEqual(report.commodities[0].unserved_fraction, 0.0)

    def test_low_load_is_served(self):
        for kind in (GREEDY, GLOBAL_MW):
            cfg = SimConfig(
                spec=line_spec('ABCD', alpha=1.0, eta=0.9, beta=0.1),
                policy=PolicyConfig(kind=kind),
                steps=2000,
                seed=1,
            )
            report = run_simulation(cfg)
            commodity = report.commodity(('D', 'A'))
            self.assertGreater(commodity.arrived, 100)
            self.assertLess(commodity.unserved_fraction, 0.05)
            self.assertEqual(report.ebit_balance, 0)

    def test_reproducible(self):
        cfg = SimConfig(spec=abcdef_spec(beta1=0.3, beta2=0.2), policy=PolicyConfig(kind=GREEDY), steps=300, seed=9)
        first = run_simulation(cfg)
        second = run_simulation(cfg)
        self.assertEqual(first, second)
        other = run_simulation(replace(cfg, seed=10))
        self.assertNotEqual(first, other)

    def test_report_contents(self):
        cfg = SimConfig(spec=abcdef_spec(beta1=0.3, beta2=0.2), policy=PolicyConfig(kind=GREEDY), steps=100)
        report = run_simulation(cfg)
        self.assertEqual([commodity.pair for commodity in report.commodities], [('A', 'E'), ('B', 'F')])
        self.assertEqual(len(report.mean_queue_lengths), 14)
        self.assertEqual(report.mean_queue_lengths[0][0], 'AB')
        for commodity in report.commodities:
            self.assertLessEqual(commodity.served, commodity.arrived)
            self.assertTrue(0.0 <= commodity.unserved_fraction <= 1.0)
        with self.assertRaises(LookupError):
            report.commodity(('A', 'B'))

    def test_trace(self):
        path = temp_path('trace.csv')
        cfg = SimConfig(spec=line_spec('ABC', beta=0.5), policy=PolicyConfig(kind=GREEDY), steps=5)
        run_simulation(cfg, trace_path=path)
        with open(path) as handle:
            self.assertEqual(len(handle.readlines()), 6)

    def test_solver_failure_carries_the_step(self):
        cfg = SimConfig(
            spec=abcdef_spec(alpha=3.0, beta1=0.5, beta2=0.5),
            policy=PolicyConfig(kind=GLOBAL_MW, solver_budget=1),
            steps=50,
        )
        with self.assertRaisesMessage(SimulationError, 'step '):
            run_simulation(cfg)

    def test_steps_must_be_positive(self):
        with self.assertRaises(ValueError):
            SimConfig(spec=line_spec('ABC'), steps=0)


class SweepSpecTestCase(SimpleTestCase):

    def test_grid_values(self):
        sweep = small_sweep(beta1=(0.0, 0.9, 10), beta2=(0.2, 0.2, 1))
        self.assertEqual(len(sweep.values(0)), 10)
        self.assertEqual(sweep.values(0)[0], 0.0)
        self.assertAlmostEqual(sweep.values(0)[-1], 0.9)
        self.assertEqual(sweep.values(1), (0.2,))

    def test_invalid(self):
        with self.assertRaises(ValueError):
            small_sweep(beta1=(0.5, 0.1, 3))
        with self.assertRaises(ValueError):
            small_sweep(beta2=(0.0, 0.1, 0))
        with self.assertRaises(ValueError):
            small_sweep(axes=[('A', 'E'), ('E', 'A')])
        with self.assertRaises(ValueError):
            small_sweep(replications=0)

    def test_repeated_rates(self):
        with self.assertRaisesMessage(ValueError, 'use count 1 for a fixed rate'):
            small_sweep(beta1=(0.2, 0.2, 3))
        with self.assertRaisesMessage(ValueError, 'beta2 asks for 3 grid points'):
            small_sweep(beta2=(0.0, 1e-14, 3))
        self.assertEqual(small_sweep(beta1=(0.2, 0.2, 1)).values(0), (0.2,))


class RunSweepTestCase(SimpleTestCase):

    def setUp(self):
        self.base = SimConfig(spec=abcdef_spec(), policy=PolicyConfig(kind=GREEDY), steps=200)

    def test_grid_and_seeds(self):
        result = run_sweep(small_sweep(replications=2), self.base)
        self.assertEqual(len(result.points), 8)
        self.assertEqual(result.beta1_values, (0.0, 0.4))
        self.assertEqual(result.alpha, 1.0)
        self.assertEqual(len({point.seed for point in result.points}), 8)
        self.assertEqual(result.grid('unserved1').shape, (2, 2))
        zero = [point for point in result.points if point.beta1 == 0.0]
        self.assertTrue(all(point.arrived1 == 0 for point in zero))

    def test_single_point_matches_run_simulation(self):
        sweep = small_sweep(beta1=(0.3, 0.3, 1), beta2=(0.2, 0.2, 1))
        result = run_sweep(sweep, self.base)
        point = result.points[0]
        report = run_simulation(replace(
            self.base,
            spec=self.base.spec.with_user_rates({('A', 'E'): 0.3, ('B', 'F'): 0.2}),
            seed=point.seed,
        ))
        self.assertEqual(point.served1, report.commodity(('A', 'E')).served)
        self.assertEqual(point.unserved2, report.commodity(('B', 'F')).unserved_fraction)

    def test_independent_of_workers(self):
        sweep = small_sweep(replications=2)
        self.assertEqual(run_sweep(sweep, self.base, workers=1), run_sweep(sweep, self.base, workers=2))

    def test_failures_are_recorded(self):
        base = replace(self.base, spec=abcdef_spec(alpha=3.0), policy=PolicyConfig(kind=GLOBAL_MW, solver_budget=1))
        with self.assertLogs('qnet_scheduling.harness', level='WARNING'):
            result = run_sweep(small_sweep(beta1=(0.5, 0.5, 1), beta2=(0.5, 0.5, 1)), base)
        self.assertEqual(len(result.failures), 1)
        self.assertIn('step', result.failures[0].error)
        self.assertTrue(math.isnan(result.grid('max')[0, 0]))

    def test_unexpected_errors_are_recorded(self):
        crash = RuntimeError('Branch and bound finished without an incumbent.')
        with mock.patch('qnet_scheduling.harness.run_simulation', side_effect=crash):
            with self.assertLogs('qnet_scheduling.harness', level='ERROR'):
                result = run_sweep(small_sweep(), self.base)
        self.assertEqual(len(result.points), 4)
        self.assertEqual(len(result.failures), 4)
        self.assertEqual(result.failures[0].error, 'Branch and bound finished without an incumbent.')
        self.assertTrue(np.all(np.isnan(result.grid('max'))))

    def test_axis_must_be_user_pair(self):
        with self.assertRaises(ValueError):
            run_sweep(small_sweep(axes=[('A', 'C'), ('B', 'F')]), self.base)

    def test_replications_tighten_the_mean(self):
        # overloaded for greedy, so every run leaves a noisy share unserved
        base = replace(self.base, steps=300)

        def means(replications):
            return np.array([
                run_sweep(
                    small_sweep(beta1=(0.45, 0.45, 1), beta2=(0.45, 0.45, 1),
                                base_seed=base_seed, replications=replications),
                    base,
                ).grid('unserved1')[0, 0]
                for base_seed in range(10)
            ])

        single, pooled = means(1), means(16)
        self.assertGreater(single.std(), 0.0)
        self.assertLess(pooled.std(), single.std())


class CsvTestCase(SimpleTestCase):

    def test_empty_sweep(self):
        path = temp_path('empty.csv')
        write_csv(SweepResult(beta1_values=(), beta2_values=(), points=()), path)
        with open(path) as handle:
            self.assertEqual(handle.read(), ','.join(CSV_HEADER) + '\n')

    def test_round_trip(self):
        result = run_sweep(
            small_sweep(),
            SimConfig(spec=abcdef_spec(), policy=PolicyConfig(kind=GREEDY), steps=100),
        )
        path = temp_path('sweep.csv')
        write_csv(result, path)
        with open(path) as handle:
            self.assertEqual(len(handle.readlines()), 5)
        parsed = read_csv(path)
        self.assertEqual(parsed, result)
        np.testing.assert_array_equal(parsed.grid('max'), result.grid('max'))

    def test_failed_points_round_trip(self):
        result = SweepResult(
            beta1_values=(0.1,),
            beta2_values=(0.2,),
            points=(SweepPoint(beta1=0.1, beta2=0.2, replication=0, seed=5, error='boom'),),
        )
        path = temp_path('failed.csv')
        write_csv(result, path)
        self.assertEqual(read_csv(path), result)

    def test_small_rates_use_a_decimal_point(self):
        result = SweepResult(
            beta1_values=(1e-05,),
            beta2_values=(0.0,),
            points=(SweepPoint(
                beta1=1e-05, beta2=0.0, replication=0, seed=5,
                unserved1=2.5e-07, unserved2=0.0, served1=1, arrived1=4, served2=0, arrived2=0,
                final_q_total=3, final_d_total=0,
            ),),
        )
        path = temp_path('small.csv')
        write_csv(result, path)
        with open(path) as handle:
            lines = handle.read().splitlines()
        self.assertEqual(lines[1], '0.00001,0.0,0,5,0.00000025,0.0,1,4,0,0,3,0')
        self.assertEqual(read_csv(path), result)

    def test_unwritable_path(self):
        with self.assertRaisesMessage(OSError, 'missing'):
            write_csv(SweepResult((), (), ()), os.path.join(temp_path('missing'), 'sweep.csv'))


class HeatmapTestCase(SimpleTestCase):

    def result(self, values):
        points = []
        for (i1, i2), value in np.ndenumerate(np.asarray(values, dtype=float)):
            points.append(SweepPoint(
                beta1=0.1 * i1, beta2=0.1 * i2, replication=0, seed=0,
                unserved1=value, unserved2=value,
            ))
        shape = np.shape(values)
        return SweepResult(
            beta1_values=tuple(0.1 * i for i in range(shape[0])),
            beta2_values=tuple(0.1 * i for i in range(shape[1])),
            points=tuple(points),
            alpha=0.2,
        )

    def test_single_cell(self):
        path = temp_path('one.png')
        render_heatmap(self.result([[0.0]]), path, cell_size=4)
        with Image.open(path) as image:
            self.assertEqual(image.size, (4, 4))

    def test_constant_metric_is_uniform(self):
        path = temp_path('flat.png')
        render_heatmap(self.result(np.zeros((3, 3))), path, cell_size=4, show_bound=False)
        with Image.open(path) as image:
            self.assertEqual(len(image.getcolors()), 1)

    def test_orientation_and_scale(self):
        image = render_heatmap(self.result([[0.0, 1.0], [0.0, 0.0]]), temp_path('map.png'), cell_size=4, show_bound=False)
        # beta2 grows upwards: the (beta1=0, beta2=0.1) cell is top left
        self.assertEqual(image.getpixel((0, 0)), (253, 231, 37))
        self.assertEqual(image.getpixel((0, 7)), (31, 40, 120))

    def test_bound_overlay(self):
        image = render_heatmap(self.result(np.zeros((3, 3))), temp_path('bound.png'), cell_size=8)
        self.assertIn((255, 255, 255), [colour for _count, colour in image.getcolors()])

    def test_unknown_metric(self):
        with self.assertRaises(ValueError):
            render_heatmap(self.result([[0.0]]), temp_path('x.png'), metric='mean')

    def test_empty(self):
        with self.assertRaises(ValueError):
            render_heatmap(SweepResult((), (), ()), temp_path('x.png'))


class SlowEnvironmentTestCase(SimpleTestCase):

    def test_tox_enables_the_gated_tests(self):
        tox = configparser.ConfigParser()
        tox.read(os.path.join(os.path.dirname(__file__), os.pardir, 'tox.ini'))
        setenv = tox.get('testenv:slow', 'setenv')
        self.assertIn('QNET_SCHEDULING_SLOW_TESTS = 1', setenv)


def unserved_grid(kind, beta_max, steps=10_000):
    sweep = SweepSpec(
        axes=[('A', 'E'), ('B', 'F')],
        beta1=(0.0, beta_max, 11),
        beta2=(0.0, beta_max, 11),
        base_seed=2024,
    )
    base = SimConfig(spec=abcdef_spec(alpha=1.0, eta=0.9), policy=PolicyConfig(kind=kind), steps=steps)
    result = run_sweep(sweep, base, workers=os.cpu_count() or 1)
    return result, result.grid('max')


@skipUnless(SLOW_TESTS, 'set QNET_SCHEDULING_SLOW_TESTS=1 to run rate-region sweeps')
class RateRegionTestCase(SimpleTestCase):
    """Capacity regions on ABCDEF at 10^4 steps, alpha = 1, eta = 0.9."""

    def served_edge(self, result, grid, threshold=0.1):
        # largest beta on the axis with the other commodity idle
        values = result.beta1_values
        served = [value for index, value in enumerate(values) if grid[index, 0] < threshold]
        return max(served)

    def diagonal_edge(self, result, grid, threshold=0.1):
        values = result.beta1_values
        sums = [
            values[i1] + values[i2]
            for i1 in range(len(values)) for i2 in range(len(values))
            if grid[i1, i2] < threshold
        ]
        return max(sums)

    def assertMonotone(self, grid, tolerance=0.05):
        self.assertTrue(np.all(np.diff(grid, axis=0) >= -tolerance))
        self.assertTrue(np.all(np.diff(grid, axis=1) >= -tolerance))

    def assertCapacity(self, measured, expected):
        self.assertAlmostEqual(measured, expected, delta=expected * 0.15 + 1e-9)

    def assertParallelToBound(self, result, grid, low, high, threshold=0.1):
        # on the diagonal part of the edge beta1 + beta2 stays constant
        values = result.beta1_values
        step = values[1] - values[0]
        sums = []
        for i1, beta1 in enumerate(values):
            if not low <= beta1 <= high:
                continue
            served = [values[i2] for i2 in range(len(values)) if grid[i1, i2] < threshold]
            self.assertTrue(served, 'nothing served at beta1 = {}'.format(beta1))
            sums.append(beta1 + max(served))
        self.assertGreater(len(sums), 1)
        self.assertLessEqual(max(sums) - min(sums), step + 1e-9)

    def test_regions_and_ordering(self):
        greedy, greedy_grid = unserved_grid(GREEDY, 0.9)
        global_mw, global_grid = unserved_grid(GLOBAL_MW, 0.9)
        local_mw, local_grid = unserved_grid(LOCAL_MW, 0.9)

        self.assertCapacity(self.served_edge(greedy, greedy_grid), 0.3)
        self.assertCapacity(self.served_edge(global_mw, global_grid), 0.6)
        self.assertCapacity(self.diagonal_edge(global_mw, global_grid), 0.8)
        self.assertCapacity(self.served_edge(local_mw, local_grid), 0.55)
        self.assertCapacity(self.diagonal_edge(local_mw, local_grid), 0.7)
        # between the individual (0.6) and cumulative (0.8) capacities
        self.assertParallelToBound(global_mw, global_grid, 0.25, 0.55)

        for grid in (greedy_grid, global_grid, local_grid):
            self.assertMonotone(grid)
        interior = (slice(1, -1), slice(1, -1))
        self.assertTrue(np.all(global_grid[interior] <= local_grid[interior] + 0.05))
        self.assertTrue(np.all(local_grid[interior] <= greedy_grid[interior] + 0.05))
