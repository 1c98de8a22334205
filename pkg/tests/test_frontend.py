from __future__ import annotations

import dataclasses
import random

import pytest

from ripl.ast import NameArg, OutputDecl, Program, pretty_program
from ripl.errors import CompileError
from ripl.frontend import check_program, parse, parse_kernel, tokenize
from ripl.fuzz import random_program
from ripl.typesize import compile_source

from conftest import CORPUS


def codes(src: str) -> list[str]:
    with pytest.raises(CompileError) as ei:
        check_program(parse(src))
    return [d.code for d in ei.value.diagnostics]


def test_corpus_parses_and_checks():
    assert CORPUS, "corpus directory is empty"
    for path in CORPUS:
        check_program(parse(path.read_text()))


def test_tokens_carry_one_based_positions():
    toks = tokenize("in a\n  : image")
    assert [(t.text, t.pos) for t in toks[:4]] == [("in", (1, 1)), ("a", (1, 4)), (":", (2, 3)), ("image", (2, 5))]


def test_comments_are_ignored():
    p = parse("// header\nin a : image<2,2>; // trailing\nout a;\n")
    assert [i.name for i in p.inputs] == ["a"]


def test_syntax_error_location():
    src = "in a : image<4,4>;\nlet b = mapRow(a, 1 \\v -> v);\nout b;\n"
    with pytest.raises(CompileError) as ei:
        parse(src)
    d = ei.value.diagnostics[0]
    assert (d.code, d.line, d.col) == ("E_SYNTAX", 2, 21)
    assert ei.value.report().startswith("ERROR E_SYNTAX 2:21 ")


def test_syntax_error_on_bad_character():
    with pytest.raises(CompileError) as ei:
        parse("in a : image<4,4>;\nout a$;\n")
    assert ei.value.code == "E_SYNTAX"
    assert ei.value.diagnostics[0].line == 2


def test_kernel_precedence():
    k = parse_kernel("\\p q -> p + q * 2 - -q / 3")
    assert k.params == ("p", "q")
    assert k.body.op == "-" and k.body.left.op == "+"


def test_comparisons_do_not_chain():
    with pytest.raises(CompileError):
        parse_kernel("\\p -> 1 < p < 3")


def test_rebind():
    src = "in a : image<4,4>;\nlet b = mapRow(a, 1, \\v -> v);\nlet b = mapRow(a, 1, \\v -> v);\nout b;\n"
    assert codes(src) == ["E_REBIND"]


def test_use_before_definition():
    src = ("in a : image<4,4>;\nlet b = zipWithRow(a, c, \\p q -> p);\n"
           "let c = mapRow(a, 1, \\v -> v);\nout b;\n")
    assert codes(src) == ["E_UNBOUND"]


def test_unknown_output_and_skeleton():
    assert codes("in a : image<4,4>;\nout z;\n") == ["E_UNBOUND"]
    assert codes("in a : image<4,4>;\nlet b = blur(a, 1);\nout b;\n") == ["E_UNBOUND"]


def test_arity():
    assert codes("in a : image<4,4>;\nlet b = mapRow(a, \\v -> v);\nout b;\n") == ["E_ARITY"]
    assert codes("in a : image<4,4>;\nlet b = convolve(a, 3, \\w -> w[0]);\nout b;\n") == ["E_ARITY"]


def test_append_only_in_combine():
    assert codes("in a : image<4,4>;\nlet b = mapRow(a, append, \\v -> v);\nout b;\n") == ["E_APPEND"]
    ok = "in a : image<8,4>;\nin b : image<8,4>;\nlet c = combineRow(a, b, 4, append);\nout c;\n"
    check_program(parse(ok))


def test_duplicate_output_rejected():
    assert codes("in a : image<4,4>;\nout a;\nout a;\n") == ["E_REBIND"]


def test_kernel_shadowing_rejected():
    src = "in a : image<4,4>;\nlet b = mapRow(a, 1, \\v -> let v = 1 in [v]);\nout b;\n"
    with pytest.raises(CompileError) as ei:
        compile_source(src)
    assert ei.value.code == "E_REBIND"


def test_errors_are_all_reported_in_source_order():
    src = ("in a : image<4,4>;\nlet b = mapRow(q, 1, \\v -> v);\n"
           "let b = mapRow(a, 1, \\v -> v);\nout r;\n")
    with pytest.raises(CompileError) as ei:
        check_program(parse(src))
    assert [(d.code, d.line) for d in ei.value.diagnostics] == [
        ("E_UNBOUND", 2), ("E_REBIND", 3), ("E_UNBOUND", 4)]


def test_round_trip_corpus_and_fuzz():
    sources = [p.read_text() for p in CORPUS]
    rng = random.Random(7)
    sources += [random_program(rng) for _ in range(150)]
    for src in sources:
        once = parse(src)
        text = pretty_program(once)
        assert parse(text) == once
        assert pretty_program(parse(text)) == text


# -- scope rule against a brute-force walker ---------------------------------


def walker_accepts(p: Program) -> bool:
    bound: set[str] = set()
    for i in p.inputs:
        if i.name in bound:
            return False
        bound.add(i.name)
    for b in p.bindings:
        for a in b.app.args:
            if isinstance(a, NameArg) and a.name not in bound:
                return False
        if b.name in bound:
            return False
        bound.add(b.name)
    outs = [o.name for o in p.outputs]
    return all(o in bound for o in outs) and len(set(outs)) == len(outs)


def mutate(p: Program, rng: random.Random) -> Program:
    pool = [b.name for b in p.bindings] + [i.name for i in p.inputs] + ["ghost"]
    bindings = list(p.bindings)
    outputs = list(p.outputs)
    for _ in range(rng.randint(1, 2)):
        what = rng.randrange(3)
        if what == 0 and bindings:  # redirect an image argument
            i = rng.randrange(len(bindings))
            args = list(bindings[i].app.args)
            slots = [j for j, a in enumerate(args) if isinstance(a, NameArg)]
            j = rng.choice(slots)
            args[j] = NameArg(rng.choice(pool))
            bindings[i] = dataclasses.replace(bindings[i], app=dataclasses.replace(bindings[i].app, args=tuple(args)))
        elif what == 1 and bindings:  # rename a binding
            i = rng.randrange(len(bindings))
            bindings[i] = dataclasses.replace(bindings[i], name=rng.choice(pool))
        else:  # retarget an output
            i = rng.randrange(len(outputs))
            outputs[i] = OutputDecl(rng.choice(pool))
    return Program(p.inputs, tuple(bindings), tuple(outputs))


def test_scope_rule_matches_walker():
    rng = random.Random(11)
    accepted = rejected = 0
    for _ in range(300):
        p = parse(random_program(rng))
        q = mutate(p, rng)
        expect = walker_accepts(q)
        try:
            check_program(q)
            got = True
        except CompileError as e:
            got = False
            assert {d.code for d in e.diagnostics} <= {"E_REBIND", "E_UNBOUND"}
        assert got == expect, pretty_program(q)
        accepted += got
        rejected += not got
    assert accepted > 20 and rejected > 20
