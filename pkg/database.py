from sqlalchemy import create_engine, Column, Integer, String, Float, DateTime, Text, ForeignKey, text
from sqlalchemy.orm import declarative_base, relationship, sessionmaker
from sqlalchemy.pool import NullPool
from datetime import datetime
import json
import logging
import os

from config_loader import EnvConfig

logger = logging.getLogger(__name__)

Base = declarative_base()


class ExperimentRun(Base):
    __tablename__ = 'experiment_runs'

    id = Column(Integer, primary_key=True)
    command = Column(String(20), nullable=False)  # analytics, montecarlo, sweep, backtest
    config_json = Column(Text, nullable=False)
    seed = Column(String(20))  # u64 does not fit a signed SQLite integer
    status = Column(String(20), nullable=False, default='completed')
    result_json = Column(Text)
    created_at = Column(DateTime, default=datetime.utcnow)

    sweep_records = relationship('SweepRecord', back_populates='run', cascade='all, delete-orphan',
                                 order_by='SweepRecord.id')
    backtest_records = relationship('BacktestRecord', back_populates='run', cascade='all, delete-orphan',
                                    order_by='BacktestRecord.id')

    def to_dict(self, include_records=False):
        data = {
            'id': self.id,
            'command': self.command,
            'config': json.loads(self.config_json),
            'seed': int(self.seed) if self.seed is not None else None,
            'status': self.status,
            'result': json.loads(self.result_json) if self.result_json else None,
            'created_at': self.created_at.isoformat() if self.created_at else None,
        }
        if include_records:
            data['sweep'] = [r.to_dict() for r in self.sweep_records]
            data['backtest'] = [r.to_dict() for r in self.backtest_records]
        return data


class SweepRecord(Base):
    __tablename__ = 'sweep_records'

    id = Column(Integer, primary_key=True)
    run_id = Column(Integer, ForeignKey('experiment_runs.id'), nullable=False)
    alpha = Column(Float, nullable=False)
    mu_star = Column(Float, nullable=False)
    sigma_star = Column(Float, nullable=False)
    analytic_mean = Column(Float, nullable=False)
    analytic_std = Column(Float, nullable=False)
    mc_mean = Column(Float, nullable=False)
    mc_std = Column(Float, nullable=False)
    mc_se = Column(Float, nullable=False)
    n_paths = Column(Integer, nullable=False)

    run = relationship('ExperimentRun', back_populates='sweep_records')

    def to_dict(self):
        return {
            'alpha': self.alpha,
            'mu_star': self.mu_star,
            'sigma_star': self.sigma_star,
            'analytic_mean': self.analytic_mean,
            'analytic_std': self.analytic_std,
            'mc_mean': self.mc_mean,
            'mc_std': self.mc_std,
            'mc_se': self.mc_se,
            'n_paths': self.n_paths,
        }


class BacktestRecord(Base):
    __tablename__ = 'backtest_records'

    id = Column(Integer, primary_key=True)
    run_id = Column(Integer, ForeignKey('experiment_runs.id'), nullable=False)
    alpha = Column(Float, nullable=False)
    w = Column(Float, nullable=False)
    eps = Column(Float, nullable=False)
    final_gain_loss = Column(Float, nullable=False)
    final_value = Column(Float, nullable=False)
    n_returns = Column(Integer, nullable=False)
    x_min_observed = Column(Float, nullable=False)
    x_max_observed = Column(Float, nullable=False)
    trajectory_file = Column(String(500))

    run = relationship('ExperimentRun', back_populates='backtest_records')

    def to_dict(self):
        return {
            'alpha': self.alpha,
            'w': self.w,
            'eps': self.eps,
            'final_gain_loss': self.final_gain_loss,
            'final_value': self.final_value,
            'n_returns': self.n_returns,
            'x_min_observed': self.x_min_observed,
            'x_max_observed': self.x_max_observed,
            'trajectory_file': self.trajectory_file,
        }


class DatabaseManager:
    def __init__(self, db_path=None):
        if db_path is None:
            db_path = EnvConfig.from_env().database_path

        self.db_path = db_path

        # Ensure the directory exists
        db_dir = os.path.dirname(self.db_path)
        if db_dir and not os.path.exists(db_dir):
            os.makedirs(db_dir, exist_ok=True)

        self.engine = create_engine(
            f'sqlite:///{db_path}',
            echo=False,
            connect_args={
                'check_same_thread': False,
                'timeout': 30
            },
            poolclass=NullPool
        )
        self.SessionLocal = sessionmaker(autocommit=False, autoflush=False, bind=self.engine)

        # WAL lets the API read while a sweep is being recorded
        with self.engine.connect() as conn:
            conn.execute(text("PRAGMA journal_mode=WAL"))

    def create_tables(self):
        """Create all tables in the database."""
        Base.metadata.create_all(bind=self.engine)

    def get_session(self):
        """Get a database session."""
        return self.SessionLocal()

    def record_run(self, command, config, seed=None, result=None, status='completed', sweep_rows=None,
                   backtest_rows=None):
        """Store one CLI run with its optional sweep/backtest rows; returns the run id."""
        session = self.get_session()

        try:
            run = ExperimentRun(
                command=command,
                config_json=json.dumps(config, sort_keys=True, default=str),
                seed=str(seed) if seed is not None else None,
                status=status,
                result_json=json.dumps(result, sort_keys=True) if result is not None else None,
            )
            for row in sweep_rows or []:
                run.sweep_records.append(SweepRecord(**{key: row[key] for key in SWEEP_FIELDS}))
            for row in backtest_rows or []:
                run.backtest_records.append(BacktestRecord(**{key: row.get(key) for key in BACKTEST_FIELDS}))
            session.add(run)
            session.commit()
            logger.info("recorded %s run %d in %s", command, run.id, self.db_path)
            return run.id

        except Exception:
            session.rollback()
            logger.exception("failed to record %s run", command)
            raise
        finally:
            session.close()

    def record_sweep(self, config, seed, rows):
        """rows are SweepRow objects from montecarlo.sweep."""
        return self.record_run('sweep', config, seed=seed, sweep_rows=[row.to_dict() for row in rows])

    def record_backtest(self, config, summary, files=None):
        """summary is the dict produced by backtest.backtest_summary."""
        returns = summary['returns']
        rows = []
        for run in summary['runs']:
            rows.append({
                'alpha': run['alpha'],
                'w': run['policy']['w'],
                'eps': run['policy']['eps'],
                'final_gain_loss': run['final_gain_loss'],
                'final_value': run['final_value'],
                'n_returns': returns['n_returns'],
                'x_min_observed': returns['x_min_observed'],
                'x_max_observed': returns['x_max_observed'],
                'trajectory_file': run.get('trajectory_file'),
            })
        return self.record_run('backtest', config, result=summary, backtest_rows=rows)

    def list_runs(self, limit=50):
        session = self.get_session()
        try:
            runs = session.query(ExperimentRun).order_by(ExperimentRun.id.desc()).limit(limit).all()
            return [run.to_dict() for run in runs]
        finally:
            session.close()

    def get_run(self, run_id):
        """One run with its records, or None."""
        session = self.get_session()
        try:
            run = session.get(ExperimentRun, run_id)
            return run.to_dict(include_records=True) if run else None
        finally:
            session.close()


SWEEP_FIELDS = ('alpha', 'mu_star', 'sigma_star', 'analytic_mean', 'analytic_std', 'mc_mean', 'mc_std', 'mc_se',
                'n_paths')
BACKTEST_FIELDS = ('alpha', 'w', 'eps', 'final_gain_loss', 'final_value', 'n_returns', 'x_min_observed',
                   'x_max_observed', 'trajectory_file')


if __name__ == "__main__":
    db_manager = DatabaseManager()
    db_manager.create_tables()
    print(f"Run history database ready at {db_manager.db_path}")
