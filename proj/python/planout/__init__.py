"""Python bindings for the PlanOut interpreter and simulator."""

from ._planout import PlanoutError, Script, check, format_overrides, parse_overrides


def compile(source):
    """DSL source to serialized IR (JSON text)."""
    return Script.from_source(source).ir


def run(source, inputs, overrides=None, namespace="default", experiment="default"):
    return Script.from_source(source).evaluate(inputs, overrides, namespace, experiment)


__all__ = ["PlanoutError", "Script", "check", "compile", "format_overrides", "parse_overrides", "run"]
