# Test wiring for pytest: configure Django the way tests/settings.py does for
# django-app-helper (tests.settings.run), with the app installed and an
# in-memory sqlite database.
import django
from django.conf import settings


def pytest_configure(config):
    if settings.configured:
        return
    from tests.settings import HELPER_SETTINGS

    options = dict(HELPER_SETTINGS)
    options['INSTALLED_APPS'] = [
        'django.contrib.contenttypes',
        'django.contrib.auth',
        'qnet_scheduling',
    ] + list(options.get('INSTALLED_APPS', []))
    options.setdefault('DATABASES', {
        'default': {'ENGINE': 'django.db.backends.sqlite3', 'NAME': ':memory:'},
    })
    settings.configure(**options)
    django.setup()
