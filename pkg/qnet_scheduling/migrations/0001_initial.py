import django.db.models.deletion
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='Experiment',
            fields=[
                ('id', models.AutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('name', models.CharField(max_length=255, verbose_name='Name')),
                ('policy', models.CharField(blank=True, choices=[('greedy', 'greedy'), ('global_mw', 'global_mw'), ('local_mw', 'local_mw')], max_length=32, verbose_name='Policy')),
                ('config', models.JSONField(help_text='The experiment file the sweep was run with.', verbose_name='Configuration')),
                ('created', models.DateTimeField(auto_now_add=True, verbose_name='Created')),
            ],
            options={
                'verbose_name': 'Experiment',
                'verbose_name_plural': 'Experiments',
                'ordering': ['-created'],
            },
        ),
        migrations.CreateModel(
            name='SweepPoint',
            fields=[
                ('id', models.AutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('beta1', models.FloatField()),
                ('beta2', models.FloatField()),
                ('replication', models.PositiveIntegerField()),
                ('seed', models.BigIntegerField()),
                ('unserved1', models.FloatField(blank=True, null=True)),
                ('unserved2', models.FloatField(blank=True, null=True)),
                ('served1', models.BigIntegerField(blank=True, null=True)),
                ('arrived1', models.BigIntegerField(blank=True, null=True)),
                ('served2', models.BigIntegerField(blank=True, null=True)),
                ('arrived2', models.BigIntegerField(blank=True, null=True)),
                ('final_q_total', models.BigIntegerField(blank=True, null=True)),
                ('final_d_total', models.BigIntegerField(blank=True, null=True)),
                ('error', models.TextField(blank=True, default='')),
                ('experiment', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='points', to='qnet_scheduling.experiment')),
            ],
            options={
                'verbose_name': 'Sweep point',
                'verbose_name_plural': 'Sweep points',
                'ordering': ['beta1', 'beta2', 'replication'],
            },
        ),
    ]
