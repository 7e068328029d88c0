#include <stdio.h>
#include <stdlib.h>

int copy_bytes(const char *payload, int len);

/* Input format: a decimal declared length on the first line, the
 * payload on the second. The declared length is forwarded verbatim. */
int parse_header(const char *path)
{
    FILE *fp = fopen(path, "r");
    char line[64];
    char payload[64];
    int len;

    if (!fp) {
        fprintf(stderr, "cannot open %s\n", path);
        return 2;
    }
    if (!fgets(line, sizeof(line), fp)) {
        fclose(fp);
        fprintf(stderr, "missing header line\n");
        return 2;
    }
    len = atoi(line);
    if (!fgets(payload, sizeof(payload), fp))
        payload[0] = '\0';
    fclose(fp);
    return copy_bytes(payload, len);
}
