import itertools
import json
import math
import pathlib
import random
import sys
import unittest


ROOT = pathlib.Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from zoneflow import placement as pl  # noqa: E402
from zoneflow.arch import distance, load_architecture, parse_architecture  # noqa: E402
from zoneflow.circuit import Gate, parse_circuit, stage_asap  # noqa: E402
from zoneflow.config import CompilerConfig  # noqa: E402
from zoneflow.errors import CapacityError  # noqa: E402


FIXTURE_PATH = ROOT / "tests" / "fixtures" / "worked_example.json"
CIRCUIT_DIR = ROOT / "circuits"


def brute_force_min(agents, candidates, weight):
    best = None
    targets = sorted({c for a in agents for c in candidates[a]})
    for chosen in itertools.permutations(targets, len(agents)):
        if any(c not in candidates[a] for a, c in zip(agents, chosen)):
            continue
        total = sum(weight(a, c) for a, c in zip(agents, chosen))
        best = total if best is None else min(best, total)
    return best


def brute_force_max_pairs(left, right):
    best = 0

    def extend(i, used, size):
        nonlocal best
        best = max(best, size)
        if i == len(left) or size + (len(left) - i) <= best:
            return
        for j, h in enumerate(right):
            if j not in used and set(left[i].qubits) & set(h.qubits):
                extend(i + 1, used | {j}, size + 1)
        extend(i + 1, used, size)

    extend(0, frozenset(), 0)
    return best


def grid_architecture(storage_rows, storage_cols, site_rows, site_cols):
    """One storage grid at 3 um pitch below one entanglement zone of 2 um wide sites."""
    top = 3 * (storage_rows - 1)
    ent_y = top + 17
    slm = {"num_col": site_cols, "num_row": site_rows, "sep": [12, 10]}
    return parse_architecture(
        {
            "aods": [{"aod_id": 0, "max_num_col": 8, "max_num_row": 8, "min_sep": 1}],
            "zones": [
                {
                    "zone_id": 0,
                    "kind": "storage",
                    "offset": [0, 0],
                    "dimension": [3 * (storage_cols - 1), top],
                    "slms": [
                        {"slm_id": 0, "num_col": storage_cols, "num_row": storage_rows, "sep": [3, 3], "offset": [0, 0]}
                    ],
                },
                {
                    "zone_id": 1,
                    "kind": "entanglement",
                    "offset": [0, ent_y],
                    "dimension": [12 * (site_cols - 1) + 2, 10 * (site_rows - 1)],
                    "slms": [
                        {"slm_id": 1, "offset": [0, ent_y], **slm},
                        {"slm_id": 2, "offset": [2, ent_y], **slm},
                    ],
                },
            ],
        }
    )


def random_stage(rng, num_qubits, start):
    qubits = list(range(num_qubits))
    rng.shuffle(qubits)
    count = rng.randint(1, num_qubits // 2)
    return [Gate("cz", (qubits[2 * i], qubits[2 * i + 1]), (), start + i) for i in range(count)]


class WorkedExampleTest(unittest.TestCase):
    @classmethod
    def setUpClass(cls) -> None:
        cls.fx = json.loads(FIXTURE_PATH.read_text(encoding="utf-8"))
        cls.arch = load_architecture(ROOT / cls.fx["arch"])
        cls.placement = pl.Placement({int(q): cls.arch.trap(*key) for q, key in cls.fx["placement"].items()})
        cls.gate = Gate("cz", tuple(cls.fx["gate"]), (), 0)

    def test_distances_and_gate_cost(self) -> None:
        site = pl.nearest_site_for_gate(self.gate, self.placement, self.arch)
        self.assertEqual(list(site.key), self.fx["expected_site"])
        self.assertAlmostEqual(distance(site.position, self.placement.position(0)), self.fx["distance_q0"], delta=0.01)
        self.assertAlmostEqual(distance(site.position, self.placement.position(1)), self.fx["distance_q1"], delta=0.01)
        self.assertAlmostEqual(pl.g_cost(self.gate, site, self.placement), self.fx["g_cost"], delta=0.01)

    def test_cost_adds_when_rows_differ(self) -> None:
        site = self.arch.site(1, 0, 0)
        moved = self.placement.updated({1: self.arch.trap(0, 2, 0)})
        expected = math.sqrt(math.sqrt(269)) + math.sqrt(math.sqrt(170))
        self.assertAlmostEqual(pl.g_cost(self.gate, site, moved), expected, places=9)

    def test_stage_weights(self) -> None:
        for t, w in self.fx["stage_weights"].items():
            with self.subTest(t=t):
                self.assertAlmostEqual(pl.stage_weight(int(t)), w, places=12)

    def test_lookahead_edge_weight(self) -> None:
        config = CompilerConfig(delta=1)
        found = pl.place_gates([self.gate], self.placement, self.arch, config, lookahead={self.gate: 2})
        site = found.assignment[self.gate]
        base = pl.g_cost(self.gate, site, self.placement)
        extra = math.sqrt(distance(site.position, self.placement.position(2)))
        self.assertAlmostEqual(found.weights[self.gate], base + extra, places=9)

        anchor = self.arch.site(1, 0, 0)
        self.assertAlmostEqual(pl.g_cost(self.gate, anchor, self.placement), self.fx["g_cost"], delta=0.02)
        self.assertAlmostEqual(
            math.sqrt(distance(anchor.position, self.placement.position(2))), self.fx["lookahead_term"], delta=0.02
        )

    def test_reserved_sites_are_skipped(self) -> None:
        config = CompilerConfig()
        reserved = [self.arch.site(1, 0, 0)]
        found = pl.place_gates([self.gate], self.placement, self.arch, config, reserved=reserved)
        self.assertNotEqual(found.assignment[self.gate].key, (1, 0, 0))

    def test_too_many_gates(self) -> None:
        config = CompilerConfig()
        gates = [Gate("cz", (2 * i, 2 * i + 1), (), i) for i in range(9)]
        placement = pl.Placement({q: self.arch.storage_traps[q] for q in range(18)})
        with self.assertRaises(CapacityError):
            pl.place_gates(gates, placement, self.arch, config)


class MatchingOracleTest(unittest.TestCase):
    def test_min_weight_matching_against_brute_force(self) -> None:
        rng = random.Random(2024)
        for trial in range(220):
            n_agents = rng.randint(1, 5)
            n_targets = rng.randint(1, 7)
            agents = list(range(n_agents))
            candidates = {a: sorted(rng.sample(range(n_targets), rng.randint(1, n_targets))) for a in agents}
            table = {(a, c): rng.choice([rng.uniform(0, 10), float(rng.randint(0, 3))]) for a in agents for c in range(n_targets)}
            weight = lambda a, c: table[(a, c)]  # noqa: E731
            found = pl._min_weight_matching(agents, candidates, weight, key=lambda c: c)
            expected = brute_force_min(agents, candidates, weight)
            with self.subTest(trial=trial):
                if expected is None:
                    self.assertIsNone(found)
                else:
                    self.assertIsNotNone(found)
                    self.assertAlmostEqual(found.total, expected, delta=1e-9)
                    self.assertEqual(len(set(found.assignment.values())), n_agents)
                    for a, c in found.assignment.items():
                        self.assertIn(c, candidates[a])

    def test_reuse_pairs_are_maximum(self) -> None:
        rng = random.Random(99)
        for trial in range(220):
            n = rng.randint(2, 8)
            stage = random_stage(rng, n, 0)
            following = random_stage(rng, n, len(stage))
            pairs = pl.reuse_pairs(stage, following)
            with self.subTest(trial=trial):
                self.assertEqual(len(pairs), brute_force_max_pairs(stage, following))
                self.assertEqual(len(set(pairs.values())), len(pairs))
                for g, h in pairs.items():
                    self.assertTrue(set(g.qubits) & set(h.qubits))

    def test_running_example_reuse(self) -> None:
        parsed = parse_circuit((CIRCUIT_DIR / "running_example.qasm").read_text(encoding="utf-8"))
        staged = stage_asap(parsed.gates, parsed.num_qubits)
        pairs = pl.reuse_pairs(staged.rydberg_stage(1).gates, staged.rydberg_stage(2).gates)
        self.assertEqual(len(pairs), 2)
        self.assertEqual(pl.reuse_pairs(staged.rydberg_stage(2).gates, staged.rydberg_stage(3).gates).__len__(), 1)


class ReturnPlacementTest(unittest.TestCase):
    @classmethod
    def setUpClass(cls) -> None:
        cls.arch = load_architecture(ROOT / "architectures" / "small.json")

    def test_return_weights_follow_cost_formula(self) -> None:
        config = CompilerConfig(neighbor_hops=1, lookahead_weight=0.1)
        rng = random.Random(5)
        sites = self.arch.sites
        for trial in range(30):
            chosen = rng.sample(sites, 2)
            placement = {0: chosen[0].left, 1: chosen[0].right, 2: chosen[1].left, 3: chosen[1].right}
            placement[4] = self.arch.storage_traps[rng.randrange(len(self.arch.storage_traps))]
            placement = pl.Placement(placement)
            homes = {q: self.arch.storage_traps[q * 3] for q in range(4)}
            related = {0: 4}
            found = pl.place_returns([0, 1, 2, 3], placement, self.arch, config, homes, related)
            with self.subTest(trial=trial):
                self.assertEqual(len(found.assignment), 4)
                targets = [t.key for t in found.assignment.values()]
                self.assertEqual(len(set(targets)), 4)
                self.assertNotIn(placement[4].key, targets)
                self.assertTrue(all(self.arch.is_storage(t) for t in found.assignment.values()))
                for q, trap in found.assignment.items():
                    value = math.sqrt(distance(trap.position, placement.position(q)))
                    if q in related:
                        value += 0.1 * math.sqrt(distance(trap.position, placement.position(related[q])))
                    self.assertAlmostEqual(found.weights[q], value, places=9)

    def test_storage_exhausted(self) -> None:
        config = CompilerConfig()
        storage = self.arch.storage_traps
        placement = {q: storage[q] for q in range(len(storage))}
        site = self.arch.sites[0]
        placement[len(storage)] = site.left
        with self.assertRaises(CapacityError):
            pl.place_returns([len(storage)], pl.Placement(placement), self.arch, config, {len(storage): storage[0]})

    def test_box_spans_home_current_and_partner(self) -> None:
        arch = load_architecture(ROOT / "architectures" / "reference.json")
        rng = random.Random(11)
        for trial in range(40):
            config = CompilerConfig(neighbor_hops=rng.randint(0, 2))
            site, other = rng.sample(arch.sites, 2)
            placement = pl.Placement(
                {0: site.left, 1: site.right, 2: other.left, 3: arch.storage_traps[rng.randrange(len(arch.storage_traps))]}
            )
            homes = {0: arch.storage_traps[rng.randrange(len(arch.storage_traps))]}
            related = {0: rng.choice([2, 3])} if trial % 2 else {}
            near = arch.nearest_storage_trap(placement.position(0))
            anchors = [homes[0], near] + arch.storage_neighbors(near, config.neighbor_hops)
            if related:
                anchors.append(arch.nearest_storage_trap(placement.position(related[0])))
            x0, y0, x1, y1 = pl.return_box(0, placement, arch, config, homes, related)
            inside = {t.key for t in arch.storage_in_box(x0, y0, x1, y1)}
            with self.subTest(trial=trial):
                self.assertEqual((x0, y0), (min(a.x for a in anchors), min(a.y for a in anchors)))
                self.assertEqual((x1, y1), (max(a.x for a in anchors), max(a.y for a in anchors)))
                for anchor in anchors:
                    self.assertIn(anchor.key, inside)


class ExhaustiveMatchingTest(unittest.TestCase):
    """Matchings against exhaustive assignment on architectures small enough to enumerate."""

    @classmethod
    def setUpClass(cls) -> None:
        cls.arch = grid_architecture(2, 4, 2, 3)

    def test_returns_match_exhaustive_assignment(self) -> None:
        arch = self.arch
        storage = arch.storage_traps
        self.assertEqual((len(storage), len(arch.sites)), (8, 6))
        rng = random.Random(23)
        boxed = 0
        for trial in range(100):
            config = CompilerConfig(neighbor_hops=rng.randint(0, 2), lookahead_weight=rng.choice([0.1, 0.5]))
            leaving = list(range(rng.randint(1, 4)))
            sites = rng.sample(arch.sites, (len(leaving) + 1) // 2)
            mapping = {q: (sites[q // 2].left if q % 2 == 0 else sites[q // 2].right) for q in leaving}
            idle = rng.sample(storage, rng.randint(0, 8 - len(leaving)))
            for offset, trap in enumerate(idle):
                mapping[len(leaving) + offset] = trap
            placement = pl.Placement(mapping)
            homes = {q: rng.choice(storage) for q in leaving}
            related = {q: rng.choice([p for p in mapping if p != q]) for q in leaving if len(mapping) > 1 and rng.random() < 0.5}
            occupied = {trap.key for trap in idle}

            def weight(q, trap):
                value = math.sqrt(distance(trap.position, placement.position(q)))
                if q in related:
                    value += config.lookahead_weight * math.sqrt(distance(trap.position, placement.position(related[q])))
                return value

            in_box = {
                q: [t for t in arch.storage_in_box(*pl.return_box(q, placement, arch, config, homes, related)) if t.key not in occupied]
                for q in leaving
            }
            free = [t for t in storage if t.key not in occupied]
            found = pl.place_returns(leaving, placement, arch, config, homes, related)
            best_in_box = brute_force_min(leaving, in_box, weight)
            best_anywhere = brute_force_min(leaving, {q: free for q in leaving}, weight)
            with self.subTest(trial=trial):
                self.assertEqual(sorted(found.assignment), leaving)
                self.assertGreaterEqual(found.total, best_anywhere - 1e-9)
                if best_in_box is not None:
                    boxed += 1
                    self.assertAlmostEqual(found.total, best_in_box, places=9)
                    for q, trap in found.assignment.items():
                        self.assertIn(trap, in_box[q])
        self.assertGreater(boxed, 20)

    def test_gates_match_exhaustive_assignment(self) -> None:
        arch = self.arch
        cap = max(arch.zone_shape(1))
        rng = random.Random(29)
        for trial in range(100):
            config = CompilerConfig(delta=rng.randint(1, 3))
            count = rng.randint(1, 4)
            traps = rng.sample(arch.storage_traps, 2 * count)
            placement = pl.Placement(dict(enumerate(traps)))
            gates = [Gate("cz", (2 * i, 2 * i + 1), (), i) for i in range(count)]
            reserved = rng.sample(arch.sites, rng.randint(0, len(arch.sites) - count))
            lookahead = {g: rng.randrange(2 * count) for g in gates if rng.random() < 0.4}
            free = [s for s in arch.sites if s not in reserved]

            def weight(gate, site):
                value = pl.g_cost(gate, site, placement)
                if gate in lookahead:
                    value += math.sqrt(distance(site.position, placement.position(lookahead[gate])))
                return value

            anchors = {g: pl.nearest_site_for_gate(g, placement, arch) for g in gates}
            delta, best = config.delta, None
            while best is None:
                near = {
                    g: [s for s in free if max(abs(s.row - anchors[g].row), abs(s.col - anchors[g].col)) <= delta]
                    for g in gates
                }
                best = brute_force_min(gates, near, weight)
                if best is None and delta >= cap:
                    best = brute_force_min(gates, {g: free for g in gates}, weight)
                delta = min(delta * 2, cap)
            found = pl.place_gates(gates, placement, arch, config, reserved=reserved, lookahead=lookahead)
            with self.subTest(trial=trial):
                self.assertAlmostEqual(found.total, best, places=9)
                self.assertEqual(len({s.key for s in found.assignment.values()}), count)
                self.assertFalse({s.key for s in found.assignment.values()} & {s.key for s in reserved})


class PlanInvariantTest(unittest.TestCase):
    @classmethod
    def setUpClass(cls) -> None:
        cls.arch = load_architecture(ROOT / "architectures" / "reference.json")
        parsed = parse_circuit((CIRCUIT_DIR / "running_example.qasm").read_text(encoding="utf-8"))
        cls.circuit = stage_asap(parsed.gates, parsed.num_qubits)

    def _plans(self, **overrides):
        config = CompilerConfig(**overrides)
        initial = pl.anneal_initial_placement(self.circuit, self.arch, config)
        return initial, pl.plan_circuit(self.circuit, self.arch, config, initial)

    def test_gates_sit_on_their_sites(self) -> None:
        for reuse in (True, False):
            initial, plans = self._plans(reuse_enabled=reuse)
            self.assertTrue(initial.is_injective())
            previous = None
            for plan in plans:
                with self.subTest(reuse=reuse, t=plan.t):
                    for gate, site in plan.gate_sites.items():
                        keys = sorted(plan.at_rydberg[q].key for q in gate.qubits)
                        self.assertEqual(keys, sorted([site.left.key, site.right.key]))
                    for q in plan.after:
                        in_storage = self.arch.is_storage(plan.after[q])
                        self.assertEqual(in_storage, q not in plan.kept)
                    if previous is not None:
                        self.assertEqual(dict(plan.before), dict(previous.after))
                        for gate, site in previous.reuse.items():
                            self.assertEqual(plan.gate_sites[gate].key, site.key)
                    if not reuse:
                        self.assertEqual(plan.kept, ())
                previous = plan

    def _walk(self, circuit, config):
        """(committed plan, candidate plans) per stage, threading state the way plan_circuit does."""
        placement = pl.anneal_initial_placement(circuit, self.arch, config)
        homes = dict(placement)
        previous = None
        for t in range(1, circuit.num_rydberg_stages + 1):
            variants = pl.stage_variants(t, circuit, placement, config, self.arch, previous=previous, homes=homes)
            plan = pl.plan_stage(t, circuit, placement, config, self.arch, previous=previous, homes=homes)
            yield plan, variants
            if config.dynamic_placement_enabled:
                homes.update(plan.returns)
            placement, previous = plan.after, plan

    def _circuits(self):
        for name in ("running_example", "ring_6", "chain_8", "ising_12"):
            parsed = parse_circuit((CIRCUIT_DIR / f"{name}.qasm").read_text(encoding="utf-8"))
            yield name, stage_asap(parsed.gates, parsed.num_qubits)

    def test_commits_cheapest_variant(self) -> None:
        config = CompilerConfig()
        for name, circuit in self._circuits():
            for plan, variants in self._walk(circuit, config):
                with self.subTest(circuit=name, t=plan.t):
                    self.assertIn(len(variants), (1, 2))
                    self.assertAlmostEqual(plan.cost, min(v.cost for v in variants), places=9)
                    if len(variants) == 2:
                        reuse_plan, plain_plan = variants
                        self.assertTrue(reuse_plan.reuse_used)
                        self.assertFalse(plain_plan.reuse_used)
                        self.assertEqual(plan.reuse_used, reuse_plan.cost <= plain_plan.cost)
                    if plan.t == circuit.num_rydberg_stages:
                        self.assertEqual(len(variants), 1)

    def test_reuse_disabled_commits_plain_plans(self) -> None:
        config = CompilerConfig(reuse_enabled=False)
        for name, circuit in self._circuits():
            for plan, variants in self._walk(circuit, config):
                with self.subTest(circuit=name, t=plan.t):
                    self.assertEqual(len(variants), 1)
                    self.assertFalse(plan.reuse_used)
                    self.assertEqual(plan.kept, ())
                    self.assertEqual(plan.reuse, {})
                    self.assertEqual(plan.inherited, ())

    def test_lookahead_outweighs_reuse_on_shallow_circuits(self) -> None:
        # The newcomer's lookahead term costs more than the return it saves on these shapes.
        config = CompilerConfig()
        for name in ("chain_8", "ghz_10", "star_5"):
            parsed = parse_circuit((CIRCUIT_DIR / f"{name}.qasm").read_text(encoding="utf-8"))
            circuit = stage_asap(parsed.gates, parsed.num_qubits)
            for plan, variants in self._walk(circuit, config):
                with self.subTest(circuit=name, t=plan.t):
                    self.assertFalse(plan.reuse_used)
                    if len(variants) == 2:
                        self.assertGreater(variants[0].cost, variants[1].cost)

    def test_static_placement_returns_home(self) -> None:
        initial, plans = self._plans(dynamic_placement_enabled=False, reuse_enabled=False)
        for plan in plans:
            for q, trap in plan.returns.items():
                self.assertEqual(trap.key, initial[q].key)

    def test_annealing_is_deterministic_and_no_worse(self) -> None:
        config = CompilerConfig(sa_seed=3)
        a = pl.anneal_initial_placement(self.circuit, self.arch, config)
        b = pl.anneal_initial_placement(self.circuit, self.arch, config)
        self.assertEqual({q: t.key for q, t in a.items()}, {q: t.key for q, t in b.items()})
        seed = pl.seed_placement(self.circuit, self.arch)
        self.assertLessEqual(
            pl.initial_placement_cost(a, self.circuit, self.arch),
            pl.initial_placement_cost(seed, self.circuit, self.arch) + 1e-9,
        )

    def test_seed_placement_uses_row_nearest_the_zone(self) -> None:
        seed = pl.seed_placement(self.circuit, self.arch)
        self.assertEqual([seed[q].key for q in range(3)], [(0, 99, 0), (0, 99, 1), (0, 99, 2)])
        config = CompilerConfig(sa_enabled=False)
        self.assertEqual(dict(pl.anneal_initial_placement(self.circuit, self.arch, config)), dict(seed))


class AnnealingOracleTest(unittest.TestCase):
    def test_anneal_reaches_exhaustive_optimum_on_storage_row(self) -> None:
        arch = grid_architecture(1, 6, 1, 2)
        self.assertEqual(len(arch.storage_traps), 6)
        circuit = stage_asap([Gate("cz", (0, 1), (), 0), Gate("cz", (1, 2), (), 1)], 3)
        optimum = min(
            pl.initial_placement_cost(pl.Placement(dict(enumerate(traps))), circuit, arch)
            for traps in itertools.permutations(arch.storage_traps, 3)
        )
        seed_cost = pl.initial_placement_cost(pl.seed_placement(circuit, arch), circuit, arch)
        costs = []
        for sa_seed in range(8):
            config = CompilerConfig(sa_seed=sa_seed, sa_iteration_limit=2000, sa_convergence_window=400)
            result = pl.anneal_initial_placement(circuit, arch, config)
            cost = pl.initial_placement_cost(result, circuit, arch)
            with self.subTest(sa_seed=sa_seed):
                self.assertTrue(result.is_injective())
                self.assertLessEqual(cost, seed_cost + 1e-9)
                self.assertGreaterEqual(cost, optimum - 1e-9)
            costs.append(cost)
        self.assertAlmostEqual(min(costs), optimum, places=9)


if __name__ == "__main__":
    unittest.main()
