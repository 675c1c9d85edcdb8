import pytest

from treetrans.generic import (
    BranchPath,
    Completed,
    GenericMachine,
    MachineStuck,
    OutOfFuel,
    Proc,
    Stuck,
    branchwise_paths,
    config_paths,
    run_generic,
)
from treetrans.fixtures import exa_thm
from treetrans.hennie import hennie_generic, hennie_semantics
from treetrans.trees import Tree, branch_words, leaf, node, parse_tree, pbt


def const_machine():
    return GenericMachine(initial="start", step=lambda c: leaf("b"))


def forever_machine():
    return GenericMachine(initial="c", step=lambda c: node("a", Tree(Proc("c")), Tree(Proc("c"))))


def stuck_machine():
    def step(c):
        raise MachineStuck(c, "nothing to do")

    return GenericMachine(initial="c", step=step)


class TestRunGeneric:
    def test_single_step(self):
        assert run_generic(const_machine(), 10) == Completed(leaf("b"))

    def test_out_of_fuel(self):
        result = run_generic(forever_machine(), 10)
        assert isinstance(result, OutOfFuel)
        assert any(isinstance(lbl, Proc) for lbl in _labels(result.partial))

    def test_stuck_reports_config(self):
        result = run_generic(stuck_machine(), 10)
        assert isinstance(result, Stuck)
        assert result.config == "c"
        assert "nothing" in result.reason

    def test_exa_thm_on_leaf(self):
        gm = hennie_generic(exa_thm(), leaf("b"))
        result = run_generic(gm, 100)
        assert result == Completed(parse_tree("a(b,b)"))

    def test_order_independence(self):
        gm = hennie_generic(exa_thm(), parse_tree("a(b,a(b,b))"))
        left = run_generic(gm, 10**5, order="leftmost")
        right = run_generic(gm, 10**5, order="rightmost")
        assert left == right

    def test_fuel_validation(self):
        with pytest.raises(ValueError):
            run_generic(const_machine(), 0)


class TestBranchwise:
    def test_single_step_machine_single_path(self):
        paths = list(branchwise_paths(const_machine(), 10))
        assert len(paths) == 1
        assert paths[0].terminal == "b"
        assert paths[0].labels == ()

    def test_exa_on_leaf_two_paths(self):
        gm = hennie_generic(exa_thm(), leaf("b"))
        paths = list(branchwise_paths(gm, 100))
        assert len(paths) == 2
        assert {p.labels for p in paths} == {(("a", 1),), (("a", 2),)}

    def test_reconstructs_branch_words(self, tiny_corpus):
        m = exa_thm()
        for t in tiny_corpus:
            gm = hennie_generic(m, t)
            out = run_generic(gm, 10**5)
            words = {
                (p.labels, p.terminal)
                for p in branchwise_paths(gm, 10**5)
                if p.outcome == "terminal"
            }
            expected = {(w.steps, w.terminal) for w in branch_words(out.tree)}
            assert words == expected

    def test_exa_path_count_is_leaf_count(self):
        gm = hennie_generic(exa_thm(), parse_tree("a(b,b)"))
        paths = [p for p in branchwise_paths(gm, 10**5) if p.outcome == "terminal"]
        assert len(paths) == len(branch_words(pbt(3)))

    def test_config_paths_dedupe(self):
        # both children of every exa rule share one successor configuration
        gm = hennie_generic(exa_thm(), parse_tree("a(b,b)"))
        assert len(list(config_paths(gm, 10**5))) == 1

    def test_stuck_path_outcome(self):
        paths = list(branchwise_paths(stuck_machine(), 10))
        assert [p.outcome for p in paths] == ["stuck"]

    def test_out_of_fuel_path(self):
        paths = list(branchwise_paths(forever_machine(), 3))
        assert all(p.outcome == "outoffuel" for p in paths)


def _labels(t: Tree):
    yield t.label
    for c in t.children:
        yield from _labels(c)
