import math

from flask import Flask, request, jsonify

import analytics
from config_loader import DEFAULT_X_MAX, DEFAULT_X_MIN, EnvConfig
from core import (DoubleLinearError, PolicyParams, PolicyValidationError, ReturnBounds, ReturnStats,
                  validate_policy)
from database import DatabaseManager

# Query parameters of /api/analytics with their defaults (None = required)
ANALYTICS_PARAMS = {
    'alpha': 0.5,
    'w': None,
    'eps': 0.0,
    'mu': None,
    'sigma': 0.0,
    'k': None,
    'v0': 1.0,
    'x_min': DEFAULT_X_MIN,
    'x_max': DEFAULT_X_MAX,
}


def create_app(db_manager=None):
    app = Flask(__name__)
    app.config['DB_MANAGER'] = db_manager

    def get_db():
        """Run-history store, opened on first use."""
        if app.config['DB_MANAGER'] is None:
            manager = DatabaseManager()
            manager.create_tables()
            app.config['DB_MANAGER'] = manager
        return app.config['DB_MANAGER']

    @app.route('/api/analytics')
    def api_analytics():
        """Closed-form report for the policy given in the query string."""
        values = {}
        for name, default in ANALYTICS_PARAMS.items():
            raw = request.args.get(name)
            if raw is None:
                if default is None:
                    return jsonify({'success': False, 'error': f"missing parameter '{name}'"}), 400
                values[name] = default
                continue
            try:
                values[name] = int(raw) if name == 'k' else float(raw)
            except ValueError:
                return jsonify({'success': False, 'error': f"parameter '{name}' is not a number: {raw!r}"}), 400

        policy = PolicyParams(alpha=values['alpha'], w=values['w'], eps=values['eps'], v0=values['v0'],
                              bounds=ReturnBounds(x_min=values['x_min'], x_max=values['x_max']))
        validation = validate_policy(policy)
        if not validation.valid:
            return jsonify({
                'success': False,
                'error': str(PolicyValidationError(validation)),
                'violations': validation.names(),
            }), 400

        try:
            result = analytics.report(policy, ReturnStats(mu=values['mu'], sigma=values['sigma']), values['k'])
            if not all(math.isfinite(v) for v in (result.expected_gain, result.variance, result.std)):
                return jsonify({'success': False, 'error': 'result is not finite; reduce k or the drift'}), 400
            return jsonify({'success': True, **result.to_dict()})
        except DoubleLinearError as e:
            return jsonify({'success': False, 'error': str(e)}), 400
        except Exception as e:
            return jsonify({'success': False, 'error': str(e)}), 500

    @app.route('/api/runs')
    def api_runs():
        """Most recent runs first."""
        try:
            limit = int(request.args.get('limit', 50))
            return jsonify({'success': True, 'runs': get_db().list_runs(limit=limit)})
        except ValueError:
            return jsonify({'success': False, 'error': 'limit must be an integer'}), 400
        except Exception as e:
            return jsonify({'success': False, 'error': str(e)}), 500

    @app.route('/api/runs/<int:run_id>')
    def api_run(run_id):
        try:
            run = get_db().get_run(run_id)
        except Exception as e:
            return jsonify({'success': False, 'error': str(e)}), 500
        if run is None:
            return jsonify({'success': False, 'error': f'run {run_id} not found'}), 404
        return jsonify({'success': True, 'run': run})

    return app


app = create_app()

if __name__ == '__main__':
    env = EnvConfig.from_env()
    app.run(debug=False, host=env.api_host, port=env.api_port)
