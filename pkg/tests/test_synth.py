from fractions import Fraction

import pytest

from oracles import naive_safety
from petcsched.errors import QueryError
from petcsched.game import (WAIT, EarlinessParams, GameState, build_network_tga, compose,
                            early_move)
from petcsched.synth import Strategy, solve_safety, strategy_query, verify_strategy
from petcsched.traffic import TrafficModel

P = EarlinessParams(2, 1, 2)


def model(lid, regions, trig, early=()):
    return TrafficModel(lid, min(regions), max(regions), set(trig), set(early), Fraction(1, 100))


def test_phase_locked_loops_lose():
    a = model("a", [5], [(5, 5)])
    b = model("b", [5], [(5, 5)])
    st = solve_safety(compose([a, b], build_network_tga(1), P))
    assert not st.success and st.losing_initial == [GameState((5, 5), (0, 0))]


def test_early_edge_breaks_phase_lock():
    a = model("a", [5], [(5, 5)], [(5, 4, 5)])
    b = model("b", [5], [(5, 5)])
    g = compose([a, b], build_network_tga(1), P)
    st = solve_safety(g)
    assert st.success
    assert strategy_query(st, GameState((5, 5), (4, 4))) == (early_move(0),)
    assert verify_strategy(g, st).ok


def test_worklist_matches_naive_fixed_point(game, strategy):
    assert strategy.winning == naive_safety(game)


def test_small_games_match_naive():
    a = model("a", [2, 3, 4], [(2, 3), (3, 2), (3, 4), (4, 4), (4, 2)],
              [(3, 1, 2), (4, 2, 3), (4, 3, 4), (3, 2, 3)])
    b = model("b", [3, 4], [(3, 3), (4, 3), (3, 4)], [(4, 2, 4)])
    for E in (1, 2, 3):
        g = compose([a, b], build_network_tga(1), EarlinessParams(2, 1, E))
        assert solve_safety(g).winning == naive_safety(g)


def test_allowed_moves_are_safe(game, strategy):
    for s, moves in strategy.allowed.items():
        sid = game.index[s]
        assert moves
        for m in moves:
            assert all(game.states[t] in strategy.winning for t in game.moves[sid][m])
        # maximal permissiveness: every excluded move can leave the winning set
        for m in set(game.moves[sid]) - set(moves):
            assert any(game.states[t] not in strategy.winning for t in game.moves[sid][m])


def test_batch_reactor_synthesis(game, strategy):
    assert strategy.success
    assert verify_strategy(game, strategy).ok
    for c2 in (1, 2, 3):
        assert early_move(0) in strategy_query(strategy, GameState((6, 4), (5, c2)))
    for c1 in (3, 4, 5):
        assert early_move(1) in strategy_query(strategy, GameState((6, 4), (c1, 3)))


def test_no_early_budget_fails(models):
    g = compose(models, build_network_tga(1), EarlinessParams(2, 1, 1))
    assert not solve_safety(g).success


def reachable_under(game, strategy):
    seen = {game.states[i] for i in game.initial}
    stack = list(seen)
    while stack:
        s = stack.pop()
        for m in strategy.allowed[s]:
            for t in game.successors(s, m):
                if t not in seen:
                    seen.add(t)
                    stack.append(t)
    return seen


def test_mutated_strategy_is_rejected(game, strategy):
    # allow a move that the solver pruned, in a state the strategy actually visits
    reach = reachable_under(game, strategy)
    bad_state = min(s for s in reach
                    if set(game.moves[game.index[s]]) - set(strategy.allowed[s]))
    extra = sorted(set(game.moves[game.index[bad_state]]) - set(strategy.allowed[bad_state]))[0]
    allowed = dict(strategy.allowed)
    allowed[bad_state] = allowed[bad_state] + (extra,)
    rep = verify_strategy(game, Strategy(strategy.winning, allowed))
    assert not rep.ok


def test_emptied_strategy_entry_is_rejected(game, strategy):
    s0 = game.states[game.initial[0]]
    allowed = dict(strategy.allowed)
    allowed[s0] = ()
    assert not verify_strategy(game, Strategy(strategy.winning, allowed)).ok


def test_strategy_file_round_trip(tmp_path, strategy):
    path = tmp_path / "s.txt"
    strategy.save(path)
    back = Strategy.load(path)
    assert back.allowed == strategy.allowed
    assert path.read_text().startswith("# ")


def test_query_outside_winning_set(strategy):
    with pytest.raises(QueryError):
        strategy_query(strategy, GameState((6, 4), (0, 0), 2, 0, 0))
    assert WAIT in strategy_query(strategy, GameState((6, 4), (0, 0)))
