import itertools
import pathlib
import random
import sys
import unittest


ROOT = pathlib.Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from zoneflow.arch import load_architecture  # noqa: E402
from zoneflow.errors import CompilerBugError  # noqa: E402
from zoneflow.routing import TO_ENTANGLEMENT, TO_STORAGE, Movement, RearrangementJob  # noqa: E402
from zoneflow.scheduler import (  # noqa: E402
    JOB,
    ONEQ,
    RYDBERG,
    DependencyEdge,
    Instruction,
    build_dependencies,
    schedule,
)


def plain_job(index, duration, qubits=(), stage=1, phase=TO_ENTANGLEMENT):
    return Instruction(index, JOB, tuple(qubits), duration, stage, phase)


def brute_force_makespan(durations, machines):
    best = None
    for assignment in itertools.product(range(machines), repeat=len(durations)):
        loads = [0.0] * machines
        for d, m in zip(durations, assignment):
            loads[m] += d
        best = max(loads) if best is None else min(best, max(loads))
    return best


class ListSchedulingTest(unittest.TestCase):
    def test_five_three_two_on_two_aods(self) -> None:
        insts = [plain_job(i, d) for i, d in enumerate([5.0, 3.0, 2.0])]
        result = schedule(insts, [], num_aods=2)
        self.assertEqual(result.makespan, 5.0)
        self.assertEqual(result.makespan, brute_force_makespan([5.0, 3.0, 2.0], 2))
        by_index = result.by_index()
        self.assertEqual(by_index[0].aod_id, 0)
        self.assertEqual((by_index[1].aod_id, by_index[1].start), (1, 0.0))
        self.assertEqual((by_index[2].aod_id, by_index[2].start), (1, 3.0))

    def test_one_aod_serialises_jobs(self) -> None:
        insts = [plain_job(i, d) for i, d in enumerate([5.0, 3.0, 2.0])]
        self.assertEqual(schedule(insts, [], num_aods=1).makespan, 10.0)

    def test_more_aods_never_hurt(self) -> None:
        rng = random.Random(8)
        for trial in range(60):
            insts = []
            for stage in range(1, rng.randint(2, 4) + 1):
                for phase, kind in ((TO_ENTANGLEMENT, JOB), (RYDBERG, RYDBERG), (ONEQ, ONEQ), (TO_STORAGE, JOB)):
                    for _ in range(rng.randint(1, 3)):
                        qubits = tuple(sorted(rng.sample(range(6), rng.randint(1, 2))))
                        duration = rng.choice([0.36, 52.0]) if kind != JOB else rng.uniform(30, 120)
                        insts.append(Instruction(len(insts), kind, qubits, duration, stage, phase))
            deps = build_dependencies(insts)
            spans = [schedule(insts, deps, n).makespan for n in (1, 2, 3)]
            with self.subTest(trial=trial):
                self.assertLessEqual(spans[1], spans[0] + 1e-9)
                self.assertLessEqual(spans[2], spans[1] + 1e-9)

    def test_backward_edge_is_a_bug(self) -> None:
        insts = [plain_job(0, 1.0), plain_job(1, 1.0)]
        with self.assertRaises(CompilerBugError):
            schedule(insts, [DependencyEdge(1, 0, "qubit")], num_aods=1)

    def test_needs_an_aod(self) -> None:
        with self.assertRaises(ValueError):
            schedule([plain_job(0, 1.0)], [], num_aods=0)

    def test_empty_program(self) -> None:
        result = schedule([], [], num_aods=1)
        self.assertEqual((result.items, result.makespan), ([], 0.0))


class DependencyTest(unittest.TestCase):
    @classmethod
    def setUpClass(cls) -> None:
        cls.arch = load_architecture(ROOT / "architectures" / "small.json")

    def _job_inst(self, index, qubit, src, dst, stage, phase, pickup, move, dropoff):
        job = RearrangementJob(
            index,
            [[Movement(qubit, self.arch.trap(*src), self.arch.trap(*dst))]],
            stage=stage,
            direction=phase,
            pickup_time=pickup,
            move_time=move,
            dropoff_time=dropoff,
        )
        return Instruction(index, JOB, (qubit,), job.duration, stage, phase, job=job)

    def test_trap_dependency_allows_overlap(self) -> None:
        leave = self._job_inst(0, 0, (1, 0, 0), (0, 0, 0), 1, TO_STORAGE, 100.0, 10.0, 15.0)
        arrive = self._job_inst(1, 1, (0, 0, 1), (1, 0, 0), 2, TO_ENTANGLEMENT, 15.0, 10.0, 15.0)
        deps = build_dependencies([leave, arrive])
        self.assertEqual(deps, [DependencyEdge(0, 1, "trap")])

        two = schedule([leave, arrive], deps, num_aods=2).by_index()
        # The arriving atoms may not reach the trap before the leaving atom is lifted.
        self.assertAlmostEqual(two[1].start, 75.0)
        self.assertNotEqual(two[0].aod_id, two[1].aod_id)
        self.assertLess(two[1].start, two[0].end)

        one = schedule([leave, arrive], deps, num_aods=1).by_index()
        self.assertAlmostEqual(one[1].start, one[0].end)

    def test_independent_jobs_share_start(self) -> None:
        a = self._job_inst(0, 0, (0, 0, 0), (1, 0, 0), 1, TO_ENTANGLEMENT, 15.0, 60.0, 15.0)
        b = self._job_inst(1, 1, (0, 1, 0), (1, 1, 0), 1, TO_ENTANGLEMENT, 15.0, 60.0, 15.0)
        deps = build_dependencies([a, b])
        self.assertEqual(deps, [])
        timed = schedule([a, b], deps, num_aods=2).by_index()
        self.assertEqual((timed[0].start, timed[1].start), (0.0, 0.0))

    def test_qubit_stage_and_lane_edges(self) -> None:
        inbound = self._job_inst(0, 0, (0, 0, 0), (1, 0, 0), 1, TO_ENTANGLEMENT, 15.0, 60.0, 15.0)
        pulse = Instruction(1, RYDBERG, (0, 1), 0.36, 1, RYDBERG, zone_id=1)
        oneq_a = Instruction(2, ONEQ, (2,), 52.0, 1, ONEQ)
        oneq_b = Instruction(3, ONEQ, (3,), 52.0, 1, ONEQ)
        outbound = self._job_inst(4, 0, (1, 0, 0), (0, 2, 0), 1, TO_STORAGE, 15.0, 60.0, 15.0)
        insts = [inbound, pulse, oneq_a, oneq_b, outbound]
        deps = build_dependencies(insts)
        kinds = {(e.src, e.dst): e.kind for e in deps}
        self.assertEqual(kinds[(0, 1)], "qubit")
        self.assertEqual(kinds[(1, 4)], "qubit")
        self.assertEqual(kinds[(2, 3)], "lane")

        timed = schedule(insts, deps, num_aods=1).by_index()
        self.assertAlmostEqual(timed[1].start, 90.0)
        self.assertAlmostEqual(timed[2].start, 0.0)
        self.assertAlmostEqual(timed[3].start, 52.0)
        self.assertAlmostEqual(timed[4].start, 90.36)

    def test_pulse_waits_for_every_inbound_job(self) -> None:
        first = self._job_inst(0, 0, (0, 0, 0), (1, 0, 0), 1, TO_ENTANGLEMENT, 15.0, 60.0, 15.0)
        second = self._job_inst(1, 5, (0, 3, 3), (2, 1, 3), 1, TO_ENTANGLEMENT, 15.0, 90.0, 15.0)
        pulse = Instruction(2, RYDBERG, (0, 1), 0.36, 1, RYDBERG, zone_id=1)
        deps = build_dependencies([first, second, pulse])
        self.assertIn(DependencyEdge(1, 2, "stage"), deps)
        timed = schedule([first, second, pulse], deps, num_aods=2).by_index()
        self.assertAlmostEqual(timed[2].start, 120.0)


if __name__ == "__main__":
    unittest.main()
