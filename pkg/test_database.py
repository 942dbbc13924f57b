import pytest

from core import PolicyParams, ReturnBounds
from database import DatabaseManager
from montecarlo import McEstimate, SweepRow


@pytest.fixture
def db(tmp_path):
    manager = DatabaseManager(str(tmp_path / 'nested' / 'runs.db'))
    manager.create_tables()
    return manager


def sweep_row(mu_star, alpha=0.5):
    mc = McEstimate(mean=0.01, std=0.2, std_error=0.002, n_paths=10000, k=252)
    return SweepRow(mu_star=mu_star, sigma_star=0.4, analytic_mean=0.011, analytic_std=0.19, mc=mc, alpha=alpha,
                    approx_mean=0.0105, approx_std=0.19)


def test_record_and_list(db):
    first = db.record_run('analytics', {'k': 10}, result={'expected_gain': 0.5})
    second = db.record_run('montecarlo', {'k': 5}, seed=(1 << 64) - 1)
    runs = db.list_runs()
    assert [r['id'] for r in runs] == [second, first]
    assert runs[0]['seed'] == (1 << 64) - 1
    assert runs[1]['config'] == {'k': 10}
    assert runs[1]['result'] == {'expected_gain': 0.5}
    assert runs[1]['seed'] is None
    assert len(db.list_runs(limit=1)) == 1


def test_missing_run(db):
    assert db.get_run(42) is None


def test_sweep_records(db):
    run_id = db.record_sweep({'n_paths': 10000}, 7, [sweep_row(-0.1), sweep_row(0.2)])
    run = db.get_run(run_id)
    assert run['command'] == 'sweep'
    assert run['seed'] == 7
    assert [r['mu_star'] for r in run['sweep']] == [-0.1, 0.2]
    assert run['sweep'][0]['mc_se'] == 0.002
    assert run['backtest'] == []


def test_backtest_records(db):
    policy = PolicyParams(alpha=0.5, w=0.25, eps=0.0001, v0=100000.0, bounds=ReturnBounds(-0.37, 0.19))
    summary = {
        'start_date': '2020-01-02',
        'end_date': '2022-08-01',
        'returns': {'sample_mean': 0.001, 'sample_std': 0.04, 'x_max_observed': 0.19, 'x_min_observed': -0.37,
                    'n_returns': 952},
        'runs': [
            {'alpha': 0.0, 'final_gain_loss': -1200.0, 'final_value': 98800.0,
             'policy': policy.with_alpha(0.0).to_dict(), 'trajectory_file': 'trajectory_alpha_0.csv'},
            {'alpha': 1.0, 'final_gain_loss': 900.0, 'final_value': 100900.0, 'policy': policy.with_alpha(1.0).to_dict()},
        ],
    }
    run = db.get_run(db.record_backtest({'prices_path': 'btc.csv'}, summary))
    assert run['result'] == summary
    assert [r['alpha'] for r in run['backtest']] == [0.0, 1.0]
    assert run['backtest'][0]['trajectory_file'] == 'trajectory_alpha_0.csv'
    assert run['backtest'][1]['trajectory_file'] is None
    assert run['backtest'][1]['n_returns'] == 952


def test_failed_insert_rolls_back(db):
    with pytest.raises(KeyError):
        db.record_run('sweep', {}, sweep_rows=[{'alpha': 0.5}])
    assert db.list_runs() == []


def test_default_path_from_environment(tmp_path, monkeypatch):
    path = tmp_path / 'env.db'
    monkeypatch.setenv('DATABASE_PATH', str(path))
    manager = DatabaseManager()
    manager.create_tables()
    assert manager.db_path == str(path)
    assert path.exists()
