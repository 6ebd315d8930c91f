import datetime as dt

import pytest

from wardstats import core, rostersim


def ct(text):
    return core.CivilTime.parse(text)


def shift(nurse, sectors, start, end):
    return core.ShiftRecord(nurse, core.parse_sectors(sectors), ct(start), ct(end))


def death(pid, sector, at, age=85):
    return core.DeathRecord(pid, core.Sector(sector), ct(at), age)


@pytest.fixture(scope="session")
def small_ward():
    """Four weeks of a morning-heavy ward with one early-arriving nurse."""
    config, profiles, intensity, _ = rostersim.morning_heavy_setup(horizon_days=28, seed=11)
    registration = rostersim.RegistrationModel(0.3, 0.2, 0.1)
    roster, admissions, deaths = rostersim.gen_ward(intensity, registration, config, profiles)
    return roster, admissions, deaths


@pytest.fixture()
def ward_files(tmp_path, small_ward):
    roster, admissions, deaths = small_ward
    paths = {"roster": tmp_path / "roster.csv", "deaths": tmp_path / "deaths.csv",
             "admissions": tmp_path / "admissions.csv"}
    paths["roster"].write_text(core.format_roster(roster), encoding="utf-8")
    paths["deaths"].write_text(core.format_deaths(deaths), encoding="utf-8")
    paths["admissions"].write_text(core.format_admissions(admissions), encoding="utf-8")
    return {k: str(v) for k, v in paths.items()}


START = dt.date(2013, 1, 7)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
