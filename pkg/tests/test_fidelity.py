import pathlib
import sys
import unittest


ROOT = pathlib.Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from zoneflow.circuit import parse_circuit, stage_asap  # noqa: E402
from zoneflow.errors import ConfigError  # noqa: E402
from zoneflow.fidelity import (  # noqa: E402
    bound_perfect_placement,
    bound_perfect_reuse,
    evaluate,
    perfect_layer_duration,
    perfect_placement_report,
    perfect_reuse_report,
    reusable_qubits,
)
from zoneflow.hardware import HardwareParams, movement_time  # noqa: E402
from zoneflow.scheduler import Schedule  # noqa: E402
from zoneflow.zair import ReplayCounters  # noqa: E402


def counters_for(num_qubits, busy, **counts):
    return ReplayCounters(num_qubits=num_qubits, busy=dict(busy), **counts)


class MovementTimeTest(unittest.TestCase):
    def test_reference_hop(self) -> None:
        self.assertAlmostEqual(movement_time(10.0), 60.30, delta=0.01)
        self.assertAlmostEqual(movement_time(40.0), 2 * movement_time(10.0))

    def test_no_distance_no_time(self) -> None:
        self.assertEqual(movement_time(0.0), 0.0)
        self.assertEqual(movement_time(-1.0), 0.0)

    def test_faster_acceleration_shortens_moves(self) -> None:
        fast = HardwareParams(accel=11000.0)
        self.assertAlmostEqual(movement_time(10.0, fast), movement_time(10.0) / 2)

    def test_hardware_params_are_checked(self) -> None:
        with self.assertRaises(ConfigError):
            HardwareParams(f2=1.5)
        with self.assertRaises(ConfigError):
            HardwareParams.from_dict({"t_warp": 1})
        self.assertEqual(HardwareParams.from_dict({"t2": 2}).t2, 2.0)
        with self.assertRaises(ConfigError) as ctx:
            HardwareParams.from_dict({"t2": "long"})
        self.assertIn("t2", str(ctx.exception))
        with self.assertRaises(ConfigError):
            HardwareParams.from_dict([1, 2])


class EvaluateTest(unittest.TestCase):
    def test_empty_program_is_perfect(self) -> None:
        report = evaluate(Schedule(), ReplayCounters())
        self.assertEqual(report.fidelity, 1.0)
        self.assertTrue(report.model_valid)

    def test_single_cz(self) -> None:
        counters = counters_for(2, {0: 0.36, 1: 0.36}, g2=1)
        report = evaluate(Schedule(makespan=0.36), counters)
        self.assertAlmostEqual(report.fidelity, 0.995)
        self.assertEqual(report.idle, {0: 0.0, 1: 0.0})

    def test_transfer_factor(self) -> None:
        counters = counters_for(1, {0: 30.0}, n_tran=2)
        report = evaluate(Schedule(makespan=30.0), counters)
        self.assertAlmostEqual(report.factor_transfer, 0.998001)
        self.assertAlmostEqual(report.fidelity, 0.998001)

    def test_excitation_factor(self) -> None:
        counters = counters_for(2, {0: 0.36, 1: 0.36}, g2=1, n_exc=1)
        report = evaluate(Schedule(makespan=0.36), counters)
        self.assertAlmostEqual(report.factor_2q, 0.995 * 0.9975)

    def test_decoherence_is_linear_in_idle_time(self) -> None:
        counters = counters_for(1, {0: 0.0})
        report = evaluate(Schedule(makespan=1e5), counters)
        self.assertAlmostEqual(report.fidelity, 1.0 - 0.1 / 1.5)
        self.assertTrue(report.model_valid)

    def test_idle_beyond_t2_saturates(self) -> None:
        counters = counters_for(2, {0: 0.0, 1: 2e6})
        report = evaluate(Schedule(makespan=2e6), counters)
        self.assertEqual(report.fidelity, 0.0)
        self.assertEqual(report.saturated_qubits, [0])
        self.assertFalse(report.model_valid)
        self.assertEqual(report.as_dict()["saturated_qubits"], [0])


class BoundTest(unittest.TestCase):
    @classmethod
    def setUpClass(cls) -> None:
        parsed = parse_circuit((ROOT / "circuits" / "running_example.qasm").read_text(encoding="utf-8"))
        cls.circuit = stage_asap(parsed.gates, parsed.num_qubits)
        cls.hw = HardwareParams()

    def test_perfect_layer(self) -> None:
        self.assertAlmostEqual(perfect_layer_duration(), 90.30, delta=0.01)

    def test_perfect_placement_without_reuse(self) -> None:
        report = perfect_placement_report(self.circuit, self.hw)
        self.assertEqual(report.n_tran, 8 * self.circuit.g2)
        self.assertEqual(report.n_exc, 0)
        expected = 6 * perfect_layer_duration() + 3 * 0.36 + 4 * 52.0
        self.assertAlmostEqual(report.duration, expected)

    def test_reusable_qubits(self) -> None:
        self.assertEqual(reusable_qubits(self.circuit, 1), {0, 1, 3, 4})
        self.assertEqual(reusable_qubits(self.circuit, 2), {2, 5})
        self.assertEqual(reusable_qubits(self.circuit, 3), set())

    def test_reuse_bound_dominates(self) -> None:
        placement = perfect_placement_report(self.circuit, self.hw)
        reuse = perfect_reuse_report(self.circuit, self.hw)
        self.assertEqual(reuse.n_tran, placement.n_tran - 2 * 6)
        self.assertLessEqual(reuse.duration, placement.duration)
        self.assertGreaterEqual(bound_perfect_reuse(self.circuit), bound_perfect_placement(self.circuit))

    def test_cap_limits_duration(self) -> None:
        report = perfect_placement_report(self.circuit, self.hw, cap=100.0)
        self.assertEqual(report.duration, 100.0)
        self.assertGreaterEqual(report.fidelity, perfect_placement_report(self.circuit, self.hw).fidelity)


if __name__ == "__main__":
    unittest.main()
