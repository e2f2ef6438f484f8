"""Shared fields, admissible sets and Eisenstein contexts."""

import pytest

from elliptic_dedekind.cfmartin import AdmissibleSet, default_admissible
from elliptic_dedekind.eisenstein import EisensteinContext, make_context
from elliptic_dedekind.qfield import FieldContext, make_field


@pytest.fixture(scope="session")
def field2() -> FieldContext:
    return make_field(2)


@pytest.fixture(scope="session")
def field7() -> FieldContext:
    return make_field(7)


@pytest.fixture(scope="session")
def adm2(field2: FieldContext) -> AdmissibleSet:
    return default_admissible(field2, 0.9)


@pytest.fixture(scope="session")
def ctx2(field2: FieldContext) -> EisensteinContext:
    return make_context(field2)


@pytest.fixture(scope="session")
def ctx7(field7: FieldContext) -> EisensteinContext:
    return make_context(field7)
