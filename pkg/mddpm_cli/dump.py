"""mddpm via command line - the generated command reference"""

def dump_commands(commands, usage):
    """Markdown table of every command and its flags"""

    a = ['# mddpm', '', '## Table of commands', '', '```', usage, '```', '',
         '|command|flags|required|what it does|',
         '|:------|:----|:-------|:-----------|']
    for name in sorted(commands):
        c = commands[name]
        flags = ' '.join('`--%s`' % (f.rstrip('=')) for f in c['flags'])
        required = ' '.join('`--%s`' % (f) for f in c['required'])
        a.append('|`%s`|%s|%s|%s|' % (name, flags, required, c['help']))
    a += ['',
          '## Exit codes', '',
          '|code|meaning|',
          '|:---|:------|',
          '|0|every requested artifact was produced|',
          '|2|config or argument error|',
          '|3|numeric failure (non-finite values, divergence, contract violation)|',
          '|4|I/O or file format failure|',
          '',
          '## Environment', '',
          '|variable|effect|',
          '|:-------|:-----|',
          '|`MDDPM_OUTPUT`|overrides the config output directory|',
          '|`MDDPM_VERBOSE`|turns on debug logging|',
         ]
    return '\n'.join(a) + '\n'
